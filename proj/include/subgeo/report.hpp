#pragma once

// Job execution and rendering: records, counts, text tables and canonical JSON.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "catalog.hpp"
#include "identities.hpp"
#include "manifest.hpp"
#include "soliton.hpp"
#include "submersion.hpp"

namespace subgeo {

inline constexpr const char* kVersion = "0.1.0";

struct Counts {
  std::size_t pass = 0, fail = 0, hypothesis_not_met = 0, paper_divergent = 0;
  std::size_t total() const { return pass + fail + hypothesis_not_met + paper_divergent; }
};

struct Report {
  nlohmann::json job = nlohmann::json::object();
  std::vector<ResidualReport> records;
  std::vector<InfoRecord> informational;
  nlohmann::json fits = nlohmann::json::object();
  std::vector<std::string> notes;
  double tol = 1e-6;
  std::uint64_t seed = 42;
  double wall_time = 0.0;

  Counts counts() const {
    Counts c;
    for (const auto& r : records) {
      if (r.verdict == "pass") ++c.pass;
      else if (r.verdict == "hypothesis-not-met") ++c.hypothesis_not_met;
      else if (r.verdict == "paper-divergent") ++c.paper_divergent;
      else ++c.fail;
    }
    return c;
  }
  int exit_code() const { return counts().fail == 0 ? 0 : 1; }
};

class InvalidJob : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Every check name accepted by the CLI, in listing order.
inline std::vector<std::string> all_check_names() {
  std::vector<std::string> out = identity_ids();
  for (const auto& s : soliton_check_ids()) out.push_back(s);
  for (const auto& r : report_ops()) out.push_back(r);
  return out;
}

inline std::vector<std::string> expand_checks(const std::vector<std::string>& checks) {
  std::vector<std::string> out;
  auto push = [&](const std::string& c) {
    if (std::find(out.begin(), out.end(), c) == out.end()) out.push_back(c);
  };
  for (const auto& c : checks) {
    if (c == "all")
      for (const auto& a : all_check_names()) push(a);
    else
      push(c);
  }
  return out;
}

inline nlohmann::json flags_json(const StructureFlags& f) {
  nlohmann::json j = nlohmann::json::object();
  f.for_each([&](const char* name, const Flag& fl) { j[name] = {{"holds", fl.holds}, {"max_violation", fl.max_violation}}; });
  return j;
}

namespace detail {

inline ResidualReport error_record(const std::string& id, const Point& p, std::size_t idx, const std::string& what) {
  ResidualReport r;
  r.kind = "error";
  r.identity_id = id;
  r.point = p.coords;
  r.point_index = idx;
  r.verdict = "fail";
  r.note = what;
  return r;
}

inline nlohmann::json mu_fit_json(const MuFit& f) {
  nlohmann::json pp = nlohmann::json::array();
  for (const auto& [p, r] : f.per_point) pp.push_back({{"point", p.coords}, {"residual", r}});
  return {{"mu", f.mu}, {"max_residual", f.max_residual}, {"classification", f.classification}, {"per_point", pp}};
}

inline nlohmann::json conformal_json(const ConformalFit& f) {
  nlohmann::json pp = nlohmann::json::array();
  for (const auto& [p, v] : f.f_values) pp.push_back({{"point", p.coords}, {"f", v}});
  return {{"f_values", pp}, {"max_residual", f.max_residual}, {"is_killing", f.is_killing}};
}

}  // namespace detail

/// Runs every requested check at every point of the job.
inline Report run_job(const VerificationJob& job, const std::vector<std::string>& requested, double tol,
                      std::uint64_t seed, const std::string& source) {
  auto t0 = std::chrono::steady_clock::now();
  Report rep;
  rep.tol = tol;
  rep.seed = seed;
  const auto& s = job.setup;
  auto checks = expand_checks(requested);

  std::vector<std::string> ids, sol;
  for (const auto& c : checks) {
    if (is_identity_id(c)) ids.push_back(c);
    const auto& sl = soliton_check_ids();
    if (std::find(sl.begin(), sl.end(), c) != sl.end()) sol.push_back(c);
  }

  std::optional<VectorFieldSpec> xi;
  if (!job.xi_name.empty()) xi = job.fields.at(job.xi_name).spec;

  // constant mu: declared, else fitted
  std::optional<MuFit> mufit;
  bool want_fit = std::find(checks.begin(), checks.end(), "fit_mu") != checks.end();
  if (xi && (want_fit || (!sol.empty() && !job.mu))) {
    try {
      mufit = fit_mu(s.total, *xi, job.points, 0, tol);
    } catch (const std::exception& e) {
      rep.notes.push_back(std::string("fit_mu: ") + e.what());
    }
  }
  if (mufit && want_fit) rep.fits["fit_mu"] = detail::mu_fit_json(*mufit);
  double mu = job.mu ? *job.mu : (mufit ? mufit->mu : 0.0);

  for (const auto& c : checks)
    if (auto t = conformal_target(c)) {
      auto f = conformal_field_fit(s.total, job.fields.at(*t).spec, job.points, tol);
      rep.fits["conformal(" + *t + ")"] = detail::conformal_json(f);
    }

  StructureFlags flags;
  double lmin = 1e300, lmax = -1e300;
  std::size_t ok_points = 0;
  for (std::size_t i = 0; i < job.points.size(); ++i) {
    const auto& p = job.points[i];
    SubmersionPoint sp;
    try {
      sp = analyze(s, p);
    } catch (const std::exception& e) {
      rep.records.push_back(detail::error_record("analyze", p, i, e.what()));
      continue;
    }
    ++ok_points;
    fold_flags(flags, point_violations(sp));
    lmin = std::min(lmin, std::sqrt(sp.lsq));
    lmax = std::max(lmax, std::sqrt(sp.lsq));
    if (!ids.empty()) {
      try {
        auto rs = verify_identities(s, sp, ids, tol, i);
        rep.records.insert(rep.records.end(), rs.begin(), rs.end());
      } catch (const std::exception& e) {
        rep.records.push_back(detail::error_record("identities", p, i, e.what()));
      }
    }
    if (!sol.empty() && xi) {
      try {
        SolitonInput in{*xi, mu};
        SolitonContext ctx(s, sp, in, tol, i);
        for (const auto& id : sol) {
          auto rs = ctx.run(id);
          rep.records.insert(rep.records.end(), rs.begin(), rs.end());
        }
      } catch (const std::exception& e) {
        rep.records.push_back(detail::error_record("soliton", p, i, e.what()));
      }
    }
  }
  if (ok_points == 0 && !job.points.empty())
    throw InvalidJob("no sample point admits a submersion with a nondegenerate metric");
  finalize_flags(flags, tol);

  rep.job = {{"source", source},
             {"m", s.m()},
             {"n", s.n()},
             {"total_coords", s.total.coord_names},
             {"base_coords", s.base.coord_names},
             {"points", job.points.size()},
             {"checks", checks},
             {"structure_flags", flags_json(flags)}};
  if (ok_points > 0) rep.job["lambda_range"] = {lmin, lmax};
  if (!job.xi_name.empty()) rep.job["xi"] = job.xi_name;
  if (!sol.empty()) rep.job["mu"] = mu;
  rep.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

/// Catalog comparisons plus any extra checks run on the example's setup.
inline Report run_example_job(const std::string& id, const std::vector<std::string>& extra_checks, double tol,
                              std::size_t npoints, std::uint64_t seed) {
  auto t0 = std::chrono::steady_clock::now();
  auto ex = load_example(id);
  auto pts = example_points(ex, npoints, seed);
  VerificationJob job = ex.job;
  job.points = pts;
  Report rep = run_job(job, extra_checks, tol, seed, "example " + id);
  auto er = run_example(ex, tol, pts, seed);
  rep.records.insert(rep.records.begin(), er.records.begin(), er.records.end());
  rep.informational = er.informational;
  rep.notes.insert(rep.notes.begin(), er.notes.begin(), er.notes.end());
  rep.job["title"] = ex.title;
  rep.job["structure_flags"] = flags_json(er.flags);
  rep.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

// ------------------------------------------------------------------ JSON

inline nlohmann::json record_json(const ResidualReport& r) {
  nlohmann::json hy = nlohmann::json::array();
  for (const auto& h : r.hypotheses) hy.push_back({{"name", h.name}, {"ok", h.ok}, {"violation", h.violation}});
  nlohmann::json terms = nlohmann::json::array();
  for (const auto& t : r.terms) terms.push_back({{"name", t.name}, {"value", t.value}});
  nlohmann::json j = {{"kind", r.kind},
                      {"identity_id", r.identity_id},
                      {"tuple", r.tuple},
                      {"point", r.point},
                      {"point_index", r.point_index},
                      {"lhs", r.lhs},
                      {"rhs", r.rhs},
                      {"abs_residual", r.abs_residual},
                      {"rel_residual", r.rel_residual},
                      {"hypotheses", hy},
                      {"terms", terms},
                      {"verdict", r.verdict},
                      {"flags", r.flags},
                      {"note", r.note}};
  if (!r.provenance.empty()) j["provenance"] = r.provenance;
  if (!r.samples.empty()) {
    nlohmann::json ss = nlohmann::json::array();
    for (const auto& s : r.samples)
      ss.push_back({{"point", s.point}, {"lhs", s.lhs}, {"rhs", s.rhs}, {"abs_residual", s.abs_residual}});
    j["samples"] = ss;
  }
  return j;
}

inline nlohmann::json report_json(const Report& rep) {
  nlohmann::json recs = nlohmann::json::array();
  for (const auto& r : rep.records) recs.push_back(record_json(r));
  nlohmann::json info = nlohmann::json::array();
  for (const auto& i : rep.informational) {
    nlohmann::json vals = nlohmann::json::array();
    for (const auto& v : i.values) vals.push_back({{"name", v.name}, {"value", v.value}});
    info.push_back({{"name", i.name}, {"point", i.point}, {"values", vals}});
  }
  auto c = rep.counts();
  return {{"job", rep.job},
          {"records", recs},
          {"informational", info},
          {"fits", rep.fits},
          {"notes", rep.notes},
          {"counts",
           {{"pass", c.pass}, {"fail", c.fail}, {"hypothesis_not_met", c.hypothesis_not_met}, {"paper_divergent", c.paper_divergent}}},
          {"meta", {{"tol", rep.tol}, {"seed", rep.seed}, {"version", kVersion}}}};
}

namespace detail {

inline void dump_canonical(const nlohmann::json& j, std::string& out) {
  switch (j.type()) {
    case nlohmann::json::value_t::object: {
      out += '{';
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {  // std::map: sorted keys
        if (!first) out += ',';
        first = false;
        out += nlohmann::json(it.key()).dump();
        out += ':';
        dump_canonical(it.value(), out);
      }
      out += '}';
      break;
    }
    case nlohmann::json::value_t::array: {
      out += '[';
      for (std::size_t i = 0; i < j.size(); ++i) {
        if (i) out += ',';
        dump_canonical(j[i], out);
      }
      out += ']';
      break;
    }
    case nlohmann::json::value_t::number_float: {
      double v = j.get<double>();
      if (!std::isfinite(v)) {
        out += std::isnan(v) ? "\"nan\"" : (v > 0 ? "\"inf\"" : "\"-inf\"");
      } else {
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.12e", v == 0.0 ? 0.0 : v);
        out += buf;
      }
      break;
    }
    default:
      out += j.dump();
  }
}

}  // namespace detail

/// Sorted keys, floats as %.12e, no whitespace, trailing newline.
inline std::string canonical_json(const nlohmann::json& j) {
  std::string out;
  detail::dump_canonical(j, out);
  out += '\n';
  return out;
}

inline std::string render_json(const Report& rep) { return canonical_json(report_json(rep)); }

// ------------------------------------------------------------------ text

namespace detail {

inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", v == 0.0 ? 0.0 : v);
  return buf;
}

inline std::string fmt_vec(const std::vector<double>& v) {
  std::string s = "(";
  for (std::size_t i = 0; i < v.size(); ++i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v[i] == 0.0 ? 0.0 : v[i]);
    s += (i ? ", " : "") + std::string(buf);
  }
  return s + ")";
}

struct Table {
  std::vector<std::vector<std::string>> rows;
  void add(std::vector<std::string> r) { rows.push_back(std::move(r)); }
  std::string str() const {
    std::vector<std::size_t> w;
    for (const auto& r : rows)
      for (std::size_t i = 0; i < r.size(); ++i) {
        if (w.size() <= i) w.push_back(0);
        w[i] = std::max(w[i], r[i].size());
      }
    std::string out;
    for (const auto& r : rows) {
      std::string line;
      for (std::size_t i = 0; i < r.size(); ++i) {
        line += r[i];
        if (i + 1 < r.size()) line += std::string(w[i] - r[i].size() + 2, ' ');
      }
      out += "  " + line + "\n";
    }
    return out;
  }
};

inline std::string record_line_hyps(const ResidualReport& r) {
  std::string s;
  for (const auto& h : r.hypotheses)
    if (!h.ok) s += (s.empty() ? "" : ",") + h.name;
  return s;
}

}  // namespace detail

inline std::string render_text(const Report& rep, std::size_t max_listed = 40) {
  using detail::fmt;
  using detail::fmt_vec;
  std::ostringstream o;
  const auto& j = rep.job;
  o << "job: " << j.value("source", std::string()) << "\n";
  if (j.contains("title")) o << "  " << j["title"].get<std::string>() << "\n";
  o << "  m = " << j.value("m", 0) << ", n = " << j.value("n", 0) << ", points = " << j.value("points", 0) << "\n";
  if (j.contains("lambda_range"))
    o << "  lambda in [" << fmt(j["lambda_range"][0].get<double>()) << ", " << fmt(j["lambda_range"][1].get<double>())
      << "]\n";
  if (j.contains("structure_flags")) {
    o << "structure flags:\n";
    detail::Table t;
    for (auto it = j["structure_flags"].begin(); it != j["structure_flags"].end(); ++it)
      t.add({it.key(), it.value()["holds"].get<bool>() ? "yes" : "no",
             fmt(it.value()["max_violation"].get<double>())});
    o << t.str();
  }

  std::vector<const ResidualReport*> examples, divergent, failed;
  std::map<std::string, std::vector<const ResidualReport*>> grouped;
  std::vector<std::string> order;
  for (const auto& r : rep.records) {
    if (r.kind == "example") examples.push_back(&r);
    else {
      if (!grouped.count(r.identity_id)) order.push_back(r.identity_id);
      grouped[r.identity_id].push_back(&r);
    }
    if (r.verdict == "paper-divergent") divergent.push_back(&r);
    if (r.verdict == "fail") failed.push_back(&r);
  }

  if (!examples.empty()) {
    o << "example comparisons:\n";
    detail::Table t;
    t.add({"entry", "provenance", "computed", "expected", "worst point", "abs", "verdict"});
    for (const auto* r : examples)
      t.add({r->identity_id, r->provenance, fmt_vec(r->lhs), fmt_vec(r->rhs), fmt_vec(r->point), fmt(r->abs_residual),
             r->verdict});
    o << t.str();
  }
  if (!order.empty()) {
    o << "checks:\n";
    detail::Table t;
    t.add({"id", "kind", "records", "pass", "fail", "hyp-not-met", "divergent", "max rel", "flags"});
    for (const auto& id : order) {
      std::size_t c[4] = {0, 0, 0, 0};
      double mx = 0.0;
      std::set<std::string> fl;
      for (const auto* r : grouped[id]) {
        if (r->verdict == "pass") ++c[0];
        else if (r->verdict == "fail") ++c[1];
        else if (r->verdict == "hypothesis-not-met") ++c[2];
        else ++c[3];
        if (r->verdict != "hypothesis-not-met") mx = std::max(mx, r->rel_residual);
        fl.insert(r->flags.begin(), r->flags.end());
      }
      std::string fs;
      for (const auto& f : fl) fs += (fs.empty() ? "" : ",") + f;
      t.add({id, grouped[id][0]->kind, std::to_string(grouped[id].size()), std::to_string(c[0]), std::to_string(c[1]),
             std::to_string(c[2]), std::to_string(c[3]), fmt(mx), fs});
    }
    o << t.str();
  }
  auto listing = [&](const char* title, const std::vector<const ResidualReport*>& rs) {
    if (rs.empty()) return;
    o << title << " (" << rs.size() << "):\n";
    detail::Table t;
    t.add({"id", "tuple", "point", "lhs", "rhs", "abs", "rel", "note"});
    for (std::size_t i = 0; i < rs.size() && i < max_listed; ++i) {
      const auto* r = rs[i];
      t.add({r->identity_id, r->tuple, fmt_vec(r->point), fmt_vec(r->lhs), fmt_vec(r->rhs), fmt(r->abs_residual),
             fmt(r->rel_residual), r->note});
    }
    o << t.str();
    if (rs.size() > max_listed) o << "  ... " << rs.size() - max_listed << " more\n";
  };
  listing("paper-divergent", divergent);
  listing("fail", failed);

  if (!rep.fits.empty()) {
    o << "fits:\n";
    for (auto it = rep.fits.begin(); it != rep.fits.end(); ++it) {
      const auto& f = it.value();
      if (f.contains("mu"))
        o << "  " << it.key() << ": mu = " << fmt(f["mu"].get<double>()) << " (" << f["classification"].get<std::string>()
          << "), max residual " << fmt(f["max_residual"].get<double>()) << "\n";
      else
        o << "  " << it.key() << ": max residual " << fmt(f["max_residual"].get<double>())
          << (f["is_killing"].get<bool>() ? ", killing" : "") << "\n";
    }
  }
  if (!rep.informational.empty()) {
    o << "informational:\n";
    detail::Table t;
    std::vector<std::string> head{"name", "point"};
    for (const auto& v : rep.informational[0].values) head.push_back(v.name);
    t.add(head);
    for (const auto& i : rep.informational) {
      std::vector<std::string> row{i.name, fmt_vec(i.point)};
      for (const auto& v : i.values) row.push_back(fmt(v.value));
      t.add(row);
    }
    o << t.str();
  }
  for (const auto& n : rep.notes) o << "note: " << n << "\n";
  auto c = rep.counts();
  o << "counts: pass " << c.pass << ", fail " << c.fail << ", hypothesis-not-met " << c.hypothesis_not_met
    << ", paper-divergent " << c.paper_divergent << "\n";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f", rep.wall_time);
  o << "wall time: " << buf << " s\n";
  return o.str();
}

}  // namespace subgeo
