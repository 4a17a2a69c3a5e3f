#pragma once

// Keyed plain-text job description.
//
//   # comment
//   total.dim    = 2
//   total.coords = x1, x2
//   total.metric = exp(-2*x2), 0; 0, 1        rows split by ';', entries by ','
//   total.domain = x2 > -3 && x2 < 3          optional
//   base.dim / base.coords / base.metric / base.domain
//   map.components = x1
//   fields.xi    = total: 0, 0                target then components
//   soliton.xi   = xi
//   soliton.mu   = 1                          optional
//   checks       = G2.12, P3.1, fit_mu, conformal(xi)
//   points.list  = 0, 0; 1, 0.5
//   points.box   = -1, 1; -1, 1               one lo,hi row per total coordinate
//   points.count = 20
//   points.seed  = 42
//   tolerance    = 1e-6

#include <algorithm>
#include <cctype>
#include <charconv>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "identities.hpp"
#include "rng.hpp"
#include "soliton.hpp"
#include "submersion.hpp"

namespace subgeo {

class ManifestError : public std::runtime_error {
 public:
  explicit ManifestError(const std::string& msg) : std::runtime_error(msg) {}
};

struct FieldDecl {
  std::string target;  // total | base
  std::vector<std::string> components;
  VectorFieldSpec spec;
};

struct ChartDecl {
  std::vector<std::string> coords;
  std::vector<std::vector<std::string>> metric;
  std::string domain;
};

struct VerificationJob {
  ChartDecl total_decl, base_decl;
  std::vector<std::string> map_components;
  SubmersionSetup setup;
  std::map<std::string, FieldDecl> fields;
  std::string xi_name;
  std::optional<double> mu;
  std::vector<std::string> checks;
  std::vector<std::vector<double>> point_list;
  std::vector<std::pair<double, double>> box;
  std::size_t count = 20;
  std::uint64_t seed = 42;
  double tolerance = 1e-6;
  std::vector<Point> points;
};

namespace detail {

inline std::string trim(std::string_view s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return std::string(s.substr(a, b - a));
}

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= s.size(); ++i)
    if (i == s.size() || s[i] == sep) {
      out.push_back(trim(s.substr(start, i - start)));
      start = i + 1;
    }
  return out;
}

inline std::vector<std::string> split_list(std::string_view s) {
  auto v = split(s, ',');
  if (v.size() == 1 && v[0].empty()) v.clear();
  return v;
}

inline std::vector<std::vector<std::string>> split_grid(std::string_view s) {
  std::vector<std::vector<std::string>> out;
  for (const auto& row : split(s, ';')) out.push_back(split_list(row));
  return out;
}

inline double to_double(const std::string& key, const std::string& s) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v))
    throw ManifestError(key + ": '" + s + "' is not a number");
  return v;
}

inline std::uint64_t to_u64(const std::string& key, const std::string& s) {
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw ManifestError(key + ": '" + s + "' is not an unsigned integer");
  return v;
}

inline std::vector<std::vector<double>> numeric_grid(const std::string& key, const std::string& text) {
  std::vector<std::vector<double>> out;
  for (const auto& row : split_grid(text)) {
    std::vector<double> r;
    for (const auto& e : row) r.push_back(to_double(key, e));
    out.push_back(r);
  }
  return out;
}

inline ChartManifold build_chart(const std::string& prefix, const ChartDecl& d) {
  for (const auto& row : d.metric)
    if (row.size() != d.coords.size() || d.metric.size() != d.coords.size())
      throw ManifestError(prefix + ".metric: expected a " + std::to_string(d.coords.size()) + "x" +
                          std::to_string(d.coords.size()) + " grid");
  try {
    return make_chart(d.coords, d.metric, d.domain);
  } catch (const ParseError& e) {
    throw ManifestError(prefix + ": " + e.what());
  } catch (const std::invalid_argument& e) {
    throw ManifestError(prefix + ": " + e.what());
  }
}

}  // namespace detail

inline const std::vector<std::string>& report_ops() {
  static const std::vector<std::string> ops = {"structure", "fit_mu"};
  return ops;
}

/// Names a check may take: all, identity ids, soliton theorem ids, report ops, conformal(<field>).
inline bool is_known_check(const std::string& c) {
  if (c == "all" || is_identity_id(c)) return true;
  const auto& s = soliton_check_ids();
  if (std::find(s.begin(), s.end(), c) != s.end()) return true;
  const auto& r = report_ops();
  return std::find(r.begin(), r.end(), c) != r.end();
}

inline std::optional<std::string> conformal_target(const std::string& c) {
  const std::string pre = "conformal(";
  if (c.size() > pre.size() + 1 && c.compare(0, pre.size(), pre) == 0 && c.back() == ')')
    return detail::trim(std::string_view(c).substr(pre.size(), c.size() - pre.size() - 1));
  return std::nullopt;
}

/// Seeded box sampling; points outside either domain are rejected and redrawn.
inline std::vector<Point> sample_box(const SubmersionSetup& s, const std::vector<std::pair<double, double>>& box,
                                     std::size_t count, std::uint64_t seed) {
  SplitMix64 rng(seed);
  std::vector<Point> out;
  std::size_t attempts = 0;
  const std::size_t limit = 1000 * std::max<std::size_t>(count, 1);
  while (out.size() < count) {
    if (++attempts > limit) throw ManifestError("points.box: too few samples land inside the domain");
    std::vector<double> x;
    for (const auto& [lo, hi] : box) x.push_back(rng.uniform(lo, hi));
    if (!s.total.in_domain(x)) continue;
    if (!s.base.in_domain(map_at<double>(s, x))) continue;
    out.emplace_back(x);
  }
  return out;
}

inline void check_point_in_domains(const SubmersionSetup& s, const Point& p) {
  if (!s.total.in_domain(p.span())) throw ManifestError("point " + format_point(p.span()) + " is outside total.domain");
  auto y = map_at<double>(s, p.span());
  if (!s.base.in_domain(y)) throw ManifestError("point " + format_point(p.span()) + " maps outside base.domain");
}

/// Every check must name a known id or a declared total field; soliton checks need soliton.xi.
inline void validate_checks(const VerificationJob& job, const std::vector<std::string>& checks) {
  for (const auto& c : checks) {
    if (auto t = conformal_target(c)) {
      auto it = job.fields.find(*t);
      if (it == job.fields.end()) throw ManifestError("checks: unknown field '" + *t + "'");
      if (it->second.target != "total") throw ManifestError("checks: conformal field must target total");
      continue;
    }
    if (!is_known_check(c)) throw ManifestError("checks: unresolved name '" + c + "'");
    const auto& sol = soliton_check_ids();
    if ((std::find(sol.begin(), sol.end(), c) != sol.end() || c == "fit_mu") && job.xi_name.empty())
      throw ManifestError("checks: '" + c + "' needs soliton.xi");
  }
}

/// Builds setup, fields and points from the declarative part of the job.
inline void resolve_job(VerificationJob& job) {
  auto total = detail::build_chart("total", job.total_decl);
  auto base = detail::build_chart("base", job.base_decl);
  if (job.map_components.size() != base.dim)
    throw ManifestError("map.components: expected " + std::to_string(base.dim) + " components, got " +
                        std::to_string(job.map_components.size()));
  try {
    job.setup = make_setup(total, base, job.map_components);
  } catch (const ParseError& e) {
    throw ManifestError(std::string("map.components: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ManifestError(std::string("map.components: ") + e.what());
  }
  for (auto& [name, f] : job.fields) {
    const auto& coords = f.target == "base" ? base.coord_names : total.coord_names;
    if (f.components.size() != coords.size())
      throw ManifestError("fields." + name + ": expected " + std::to_string(coords.size()) + " components");
    try {
      f.spec = vector_field(f.components, coords);
    } catch (const ParseError& e) {
      throw ManifestError("fields." + name + ": " + e.what());
    }
  }
  if (!job.xi_name.empty()) {
    auto it = job.fields.find(job.xi_name);
    if (it == job.fields.end()) throw ManifestError("soliton.xi: unknown field '" + job.xi_name + "'");
    if (it->second.target != "total") throw ManifestError("soliton.xi: field must target total");
  }
  validate_checks(job, job.checks);
  job.points.clear();
  if (!job.point_list.empty()) {
    for (const auto& x : job.point_list) {
      if (x.size() != total.dim) throw ManifestError("points.list: each point needs " + std::to_string(total.dim) + " coordinates");
      Point p(x);
      check_point_in_domains(job.setup, p);
      job.points.push_back(p);
    }
  } else {
    if (job.box.size() != total.dim) throw ManifestError("points.box: expected one lo,hi row per total coordinate");
    job.points = sample_box(job.setup, job.box, job.count, job.seed);
  }
}

inline VerificationJob parse_manifest(std::string_view text) {
  std::map<std::string, std::pair<std::string, std::size_t>> kv;
  std::size_t lineno = 0;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    auto t = detail::trim(line);
    if (t.empty()) continue;
    auto eq = t.find('=');
    if (eq == std::string::npos) throw ManifestError("line " + std::to_string(lineno) + ": expected 'key = value'");
    auto key = detail::trim(std::string_view(t).substr(0, eq));
    auto val = detail::trim(std::string_view(t).substr(eq + 1));
    if (key.empty()) throw ManifestError("line " + std::to_string(lineno) + ": empty key");
    if (kv.count(key)) throw ManifestError("line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
    kv[key] = {val, lineno};
  }

  std::set<std::string> used;
  auto get = [&](const std::string& k) -> std::optional<std::string> {
    auto it = kv.find(k);
    if (it == kv.end()) return std::nullopt;
    used.insert(k);
    return it->second.first;
  };
  auto need = [&](const std::string& k) {
    auto v = get(k);
    if (!v) throw ManifestError("missing key '" + k + "'");
    return *v;
  };

  VerificationJob job;
  auto chart = [&](const std::string& prefix, ChartDecl& d) {
    auto dim = detail::to_u64(prefix + ".dim", need(prefix + ".dim"));
    d.coords = detail::split_list(need(prefix + ".coords"));
    if (d.coords.size() != dim)
      throw ManifestError(prefix + ".coords: expected " + std::to_string(dim) + " names, got " +
                          std::to_string(d.coords.size()));
    d.metric = detail::split_grid(need(prefix + ".metric"));
    if (d.metric.size() != dim)
      throw ManifestError(prefix + ".metric: expected " + std::to_string(dim) + " rows, got " +
                          std::to_string(d.metric.size()));
    for (const auto& row : d.metric)
      if (row.size() != dim)
        throw ManifestError(prefix + ".metric: expected " + std::to_string(dim) + " entries per row, got " +
                            std::to_string(row.size()));
    d.domain = get(prefix + ".domain").value_or("");
  };
  chart("total", job.total_decl);
  chart("base", job.base_decl);
  job.map_components = detail::split_list(need("map.components"));

  for (const auto& [k, v] : kv) {
    if (k.rfind("fields.", 0) != 0) continue;
    used.insert(k);
    auto name = k.substr(7);
    if (name.empty()) throw ManifestError("fields.: empty field name");
    auto colon = v.first.find(':');
    if (colon == std::string::npos) throw ManifestError(k + ": expected 'total: ...' or 'base: ...'");
    FieldDecl f;
    f.target = detail::trim(std::string_view(v.first).substr(0, colon));
    if (f.target != "total" && f.target != "base") throw ManifestError(k + ": target must be total or base");
    f.components = detail::split_list(std::string_view(v.first).substr(colon + 1));
    job.fields[name] = f;
  }
  job.xi_name = get("soliton.xi").value_or("");
  if (auto mu = get("soliton.mu")) job.mu = detail::to_double("soliton.mu", *mu);
  if (auto c = get("checks")) job.checks = detail::split_list(*c);
  if (auto l = get("points.list")) job.point_list = detail::numeric_grid("points.list", *l);
  if (auto b = get("points.box")) {
    for (const auto& row : detail::numeric_grid("points.box", *b)) {
      if (row.size() != 2 || !(row[0] < row[1])) throw ManifestError("points.box: each row must be 'lo, hi' with lo < hi");
      job.box.emplace_back(row[0], row[1]);
    }
  }
  if (!job.point_list.empty() && !job.box.empty()) throw ManifestError("points.list and points.box are exclusive");
  if (job.point_list.empty() && job.box.empty()) throw ManifestError("missing key 'points.list' or 'points.box'");
  if (auto c = get("points.count")) job.count = detail::to_u64("points.count", *c);
  if (auto s = get("points.seed")) job.seed = detail::to_u64("points.seed", *s);
  if (auto t = get("tolerance")) {
    job.tolerance = detail::to_double("tolerance", *t);
    if (!(job.tolerance > 0)) throw ManifestError("tolerance must be positive");
  }
  for (const auto& [k, v] : kv)
    if (!used.count(k)) throw ManifestError("line " + std::to_string(v.second) + ": unknown key '" + k + "'");

  resolve_job(job);
  return job;
}

/// Canonical text form; parse_manifest(print_manifest(job)) yields the same job.
inline std::string print_manifest(const VerificationJob& job) {
  std::ostringstream o;
  auto join = [](const std::vector<std::string>& v, const char* sep) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? sep : "") + v[i];
    return s;
  };
  auto chart = [&](const std::string& prefix, const ChartDecl& d, const ChartManifold& M) {
    o << prefix << ".dim = " << d.coords.size() << "\n";
    o << prefix << ".coords = " << join(d.coords, ", ") << "\n";
    std::vector<std::string> rows;
    for (const auto& row : M.metric) {
      std::vector<std::string> r;
      for (const auto& e : row) r.push_back(to_string(e));
      rows.push_back(join(r, ", "));
    }
    o << prefix << ".metric = " << join(rows, "; ") << "\n";
    if (!d.domain.empty()) o << prefix << ".domain = " << d.domain << "\n";
  };
  chart("total", job.total_decl, job.setup.total);
  chart("base", job.base_decl, job.setup.base);
  std::vector<std::string> map;
  for (const auto& e : job.setup.map_components) map.push_back(to_string(e));
  o << "map.components = " << join(map, ", ") << "\n";
  for (const auto& [name, f] : job.fields) {
    std::vector<std::string> c;
    for (const auto& e : f.spec.components) c.push_back(to_string(e));
    o << "fields." << name << " = " << f.target << ": " << join(c, ", ") << "\n";
  }
  if (!job.xi_name.empty()) o << "soliton.xi = " << job.xi_name << "\n";
  auto num = [](double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
  };
  if (job.mu) o << "soliton.mu = " << num(*job.mu) << "\n";
  if (!job.checks.empty()) o << "checks = " << join(job.checks, ", ") << "\n";
  if (!job.point_list.empty()) {
    std::vector<std::string> rows;
    for (const auto& p : job.point_list) {
      std::vector<std::string> r;
      for (double v : p) r.push_back(num(v));
      rows.push_back(join(r, ", "));
    }
    o << "points.list = " << join(rows, "; ") << "\n";
  } else {
    std::vector<std::string> rows;
    for (const auto& [lo, hi] : job.box) rows.push_back(num(lo) + ", " + num(hi));
    o << "points.box = " << join(rows, "; ") << "\n";
    o << "points.count = " << job.count << "\n";
    o << "points.seed = " << job.seed << "\n";
  }
  o << "tolerance = " << num(job.tolerance) << "\n";
  return o.str();
}

}  // namespace subgeo
