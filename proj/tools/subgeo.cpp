// subgeo: verify conformal submersion identities and soliton claims from a manifest or a catalog example.

#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "subgeo/subgeo.hpp"

namespace {

constexpr int kExitInvalid = 2;

std::vector<std::string> parse_checks(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    auto t = subgeo::detail::trim(item);
    if (t.empty()) continue;
    if (!subgeo::is_known_check(t) && !subgeo::conformal_target(t))
      throw subgeo::ManifestError("--checks: unknown check '" + t + "'");
    out.push_back(t);
  }
  return out;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw subgeo::ManifestError("cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Conformal submersion and Ricci soliton verifier"};
  app.require_subcommand(1);

  double tol = 1e-6;
  std::size_t npoints = 20;
  std::uint64_t seed = 42;
  std::string format = "text";
  std::string checks_text;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--tol", tol, "residual tolerance")->check(CLI::PositiveNumber);
    sub->add_option("--points", npoints, "number of sample points")->check(CLI::Range(std::size_t(1), std::size_t(100000)));
    sub->add_option("--seed", seed, "sampling seed");
    sub->add_option("--format", format, "text or json")->check(CLI::IsMember({"text", "json"}));
    sub->add_option("--checks", checks_text, "comma list of checks, or all");
  };

  std::string manifest_path;
  auto* verify = app.add_subcommand("verify", "run a manifest");
  verify->add_option("manifest", manifest_path, "manifest file")->required();
  add_common(verify);

  std::string example_id;
  auto* example = app.add_subcommand("example", "run a catalog example");
  example->add_option("id", example_id, "5.1, 5.2, 5.3 or 5.4")->required();
  add_common(example);

  auto* list = app.add_subcommand("list-checks", "print every check name");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : kExitInvalid;
  }

  if (list->parsed()) {
    for (const auto& c : subgeo::all_check_names()) std::cout << c << "\n";
    std::cout << "conformal(<field>)\nall\n";
    return 0;
  }

  try {
    subgeo::Report rep;
    if (verify->parsed()) {
      auto job = subgeo::parse_manifest(read_file(manifest_path));
      if (!verify->count("--tol")) tol = job.tolerance;
      if (job.point_list.empty() && (verify->count("--points") || verify->count("--seed"))) {
        if (verify->count("--points")) job.count = npoints;
        if (verify->count("--seed")) job.seed = seed;
        job.points = subgeo::sample_box(job.setup, job.box, job.count, job.seed);
      }
      seed = job.seed;
      auto checks = job.checks;
      if (verify->count("--checks")) {
        checks = parse_checks(checks_text);
        subgeo::validate_checks(job, checks);
      }
      rep = subgeo::run_job(job, checks, tol, seed, manifest_path);
    } else {
      std::vector<std::string> checks;
      if (example->count("--checks")) checks = parse_checks(checks_text);
      auto ids = subgeo::example_ids();
      if (std::find(ids.begin(), ids.end(), example_id) == ids.end())
        throw subgeo::ManifestError("unknown example '" + example_id + "' (expected 5.1, 5.2, 5.3 or 5.4)");
      rep = subgeo::run_example_job(example_id, checks, tol, npoints, seed);
    }
    std::cout << (format == "json" ? subgeo::render_json(rep) : subgeo::render_text(rep));
    return rep.exit_code();
  } catch (const subgeo::ManifestError& e) {
    std::cerr << "error: " << e.what() << "\n";
  } catch (const subgeo::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
  } catch (const subgeo::InvalidJob& e) {
    std::cerr << "error: " << e.what() << "\n";
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
  }
  return kExitInvalid;
}
