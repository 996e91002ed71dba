// prescribe: construct, run and verify matrices with prescribed (restarted,
// block) GMRES convergence.
//
//   prescribe construct --spec s.json --out dir
//   prescribe run --matrix A.mtx --rhs b.mtx [--block] --m 3 --cycles 4 --csv r.csv [--plot r.svg]
//   prescribe verify --spec s.json --in dir [--spec ... --in ...] --report report.json
//   prescribe demo <name> [--out dir] [--seed n] [--length s] [--plot]
//
// Exit codes: 0 pass, 1 a check failed, 2 usage, parse or admissibility error.
// PRESCRIBE_THREADS sets the number of scenarios verified concurrently.

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "demos.hpp"
#include "prescribe/io/pipeline.hpp"

namespace fs = std::filesystem;
using namespace prescribe;

namespace {

constexpr int kPass = 0;
constexpr int kFail = 1;
constexpr int kUsage = 2;

unsigned thread_count() {
  const char* env = std::getenv("PRESCRIBE_THREADS");
  if (!env || !*env) return 1;
  char* end = nullptr;
  const long v = std::strtol(env, &end, 10);
  if (*end != '\0' || v < 1) {
    std::cerr << "warning: ignoring PRESCRIBE_THREADS='" << env << "'\n";
    return 1;
  }
  return static_cast<unsigned>(v);
}

int cmd_construct(const fs::path& spec, const fs::path& out) {
  const io::Scenario s = io::load_scenario(spec);
  const AdmissibilityReport adm = io::validate(s);
  if (!adm.ok()) {
    std::cerr << spec.string() << ": inadmissible prescription\n" << adm.summary();
    return kUsage;
  }
  const io::Construction c = io::build(s);
  io::write_construction(out, s, c);
  std::cout << s.id << " (" << io::to_string(s.kind) << ", n = " << s.n << ") written to " << out.string() << "\n";
  return kPass;
}

int cmd_run(const fs::path& matrix, const fs::path& rhs, bool block, Index m, Index cycles, const fs::path& csv,
            const std::string& plot) {
  const Matrix A = io::read_matrix_market(matrix.string());
  const Matrix B = io::read_matrix_market(rhs.string());
  if (A.rows() != A.cols()) throw io::format_error(matrix.string() + ": operator must be square");
  if (B.rows() != A.rows()) throw io::format_error(rhs.string() + ": right-hand side has " + std::to_string(B.rows()) +
                                                   " rows, operator has " + std::to_string(A.rows()));
  if (!block && B.cols() != 1)
    throw io::format_error(rhs.string() + ": " + std::to_string(B.cols()) + " columns, pass --block for block runs");
  const RunTrace tr = restarted_block_gmres(A, B, m, cycles);
  io::write_text(csv, io::residual_csv(tr, block));
  if (!plot.empty()) io::write_text(plot, io::convergence_svg(tr, matrix.filename().string()));
  const CycleTrace& last = tr.cycles.back();
  std::cout << tr.cycles.size() << " cycle(s), final residual " << last.residual_norms.back() << "\n";
  return kPass;
}

struct VerifyJob {
  fs::path spec;
  fs::path dir;
  io::json report;
  std::string error;
};

void verify_one(VerifyJob& job) {
  const io::Scenario s = io::load_scenario(job.spec);
  const AdmissibilityReport adm = io::validate(s);
  if (!adm.ok()) throw error(job.spec.string() + ": inadmissible prescription\n" + adm.summary());

  const io::json manifest = io::json::parse(io::read_text(job.dir / "manifest.json"));
  const std::string kind = manifest.value("kind", "");
  if (kind != io::to_string(s.kind))
    throw error((job.dir / "manifest.json").string() + ": construction is of kind '" + kind + "', scenario is '" +
                io::to_string(s.kind) + "'");

  io::Construction c = io::build(s);
  const Matrix A = io::read_matrix_market((job.dir / "A.mtx").string());
  const Matrix B = io::read_matrix_market((job.dir / io::rhs_file(s)).string());
  io::substitute(c, A, B);
  job.report = io::report_json(io::verify(s, c), s.kind);
}

int cmd_verify(const std::vector<std::string>& specs, const std::vector<std::string>& dirs, const fs::path& report) {
  if (specs.size() != dirs.size()) {
    std::cerr << "verify: give one --in directory per --spec file\n";
    return kUsage;
  }
  std::vector<VerifyJob> jobs(specs.size());
  for (std::size_t i = 0; i < specs.size(); ++i) jobs[i] = {specs[i], dirs[i], {}, {}};

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      try {
        verify_one(jobs[i]);
      } catch (const std::exception& e) {
        jobs[i].error = e.what();
      }
    }
  };
  const unsigned n = std::min<unsigned>(thread_count(), static_cast<unsigned>(jobs.size()));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (std::thread& t : pool) t.join();

  std::vector<io::json> reports;
  bool errors = false;
  for (const VerifyJob& job : jobs) {
    if (!job.error.empty()) {
      std::cerr << job.error << "\n";
      errors = true;
      continue;
    }
    reports.push_back(job.report);
    std::cout << job.report.at("scenario").get<std::string>() << ": "
              << (job.report.at("pass").get<bool>() ? "pass" : "FAIL") << "\n";
    for (const io::json& c : job.report.at("checks"))
      std::cout << "  " << (c.at("pass").get<bool>() ? "pass " : "FAIL ") << c.at("name").get<std::string>()
                << "  deviation " << c.at("deviation").dump() << "  tolerance " << c.at("tolerance").dump() << "\n";
    for (const io::json& w : job.report.at("warnings")) std::cout << "  warning: " << w.get<std::string>() << "\n";
  }
  if (errors) return kUsage;
  const io::json doc = io::report_document(reports);
  io::write_text(report, doc.dump(2) + "\n");
  return doc.at("pass").get<bool>() ? kPass : kFail;
}

int cmd_demo(const std::string& name, demos::Options o) {
  const auto& reg = demos::registry();
  const auto it = reg.find(name);
  if (it == reg.end()) {
    std::cerr << "unknown demo '" << name << "'; available:";
    for (const auto& [k, v] : reg) std::cerr << " " << k;
    std::cerr << "\n";
    return kUsage;
  }
  if (o.out.empty()) o.out = "demo-" + name;
  const bool ok = it->second(o, std::cout);
  std::cout << (ok ? "pass" : "FAIL") << "; artifacts in " << o.out.string() << "\n";
  return ok ? kPass : kFail;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Construct and verify matrices with prescribed GMRES convergence"};
  app.require_subcommand(1);

  std::string spec, out;
  auto* construct = app.add_subcommand("construct", "build A and b from a scenario file");
  construct->add_option("--spec", spec, "scenario JSON")->required()->check(CLI::ExistingFile);
  construct->add_option("--out", out, "output directory")->required();

  std::string matrix, rhs, csv, plot;
  bool block = false;
  Index m = 0, cycles = 1;
  auto* run = app.add_subcommand("run", "run (block) GMRES and write the residual curve");
  run->add_option("--matrix", matrix, "operator (Matrix Market)")->required()->check(CLI::ExistingFile);
  run->add_option("--rhs", rhs, "right-hand side (Matrix Market)")->required()->check(CLI::ExistingFile);
  run->add_flag("--block", block, "block right-hand side");
  run->add_option("--m", m, "cycle length")->required()->check(CLI::PositiveNumber);
  run->add_option("--cycles", cycles, "number of cycles")->check(CLI::PositiveNumber);
  run->add_option("--csv", csv, "residual CSV")->required();
  run->add_option("--plot", plot, "optional SVG convergence plot");

  std::vector<std::string> specs, dirs;
  std::string report;
  auto* verify = app.add_subcommand("verify", "re-run the solvers on a construction and check it");
  verify->add_option("--spec", specs, "scenario JSON (repeatable)")->required()->check(CLI::ExistingFile);
  verify->add_option("--in", dirs, "construction directory (repeatable)")->required()->check(CLI::ExistingDirectory);
  verify->add_option("--report", report, "report JSON")->required();

  std::string demo_name;
  demos::Options demo_opts;
  std::string demo_out;
  auto* demo = app.add_subcommand("demo", "run a built-in scenario end to end");
  demo->add_option("name", demo_name, "mirroring, peak-plateau, rank-one-tail, block-directional-stagnation, rank-deficiency")
      ->required();
  demo->add_option("--out", demo_out, "output directory (default demo-<name>)");
  demo->add_option("--seed", demo_opts.seed, "random seed");
  demo->add_option("--length", demo_opts.length, "flat tail length")->check(CLI::Range(1, 8));
  demo->add_flag("--plot", demo_opts.plot, "also write residuals.svg");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kPass : kUsage;
  }

  try {
    if (*construct) return cmd_construct(spec, out);
    if (*run) return cmd_run(matrix, rhs, block, m, cycles, csv, plot);
    if (*verify) return cmd_verify(specs, dirs, report);
    if (*demo) {
      demo_opts.out = demo_out;
      return cmd_demo(demo_name, demo_opts);
    }
  } catch (const io::parse_error& e) {
    std::cerr << e.what() << "\n";
    return kUsage;
  } catch (const io::format_error& e) {
    std::cerr << e.what() << "\n";
    return kUsage;
  } catch (const inadmissible_error& e) {
    std::cerr << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  }
  return kUsage;
}
