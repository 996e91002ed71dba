#pragma once

// Built-in end-to-end scenarios for `prescribe demo <name>`.

#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <string>

#include "prescribe/io/pipeline.hpp"
#include "prescribe/scenarios.hpp"

namespace demos {

using namespace prescribe;
namespace fs = std::filesystem;

struct Options {
  fs::path out;
  std::uint64_t seed = 1;
  Index length = 1;  // flat tail length for the stagnation demos
  bool plot = false;
};

inline std::string num(double v, int digits = 6) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

inline std::string join(const std::vector<double>& v) {
  std::string s;
  for (double x : v) s += " " + num(x);
  return s;
}

inline void print_trace(std::ostream& os, const RunTrace& tr) {
  for (std::size_t k = 0; k < tr.cycles.size(); ++k) {
    os << "  cycle " << k + 1 << ":";
    os << join(tr.cycles[k].residual_norms) << "\n";
  }
}

inline void print_checks(std::ostream& os, const VerificationReport& rep) {
  for (const Check& c : rep.checks)
    os << "  " << (c.pass ? "PASS " : "FAIL ") << c.name << "  deviation " << num(c.deviation, 3) << " (tol "
       << num(c.tolerance, 3) << ")" << (c.detail.empty() ? "" : "  " + c.detail) << "\n";
  for (const std::string& w : rep.warnings) os << "  warning: " << w << "\n";
}

/// Same files as construct + run + verify, plus the scenario itself.
inline void emit(const Options& o, const io::Scenario* s, const io::Construction* c, const Matrix& A, const Matrix& B,
                 const RunTrace& run, const VerificationReport& rep, io::Kind kind) {
  fs::create_directories(o.out);
  if (s && c) {
    io::write_text(o.out / "scenario.json", io::pretty(io::scenario_json(*s)) + "\n");
    io::write_construction(o.out, *s, *c);
  } else {
    io::write_matrix_market((o.out / "A.mtx").string(), A, rep.scenario + " operator");
    io::write_matrix_market((o.out / (B.cols() > 1 ? "B.mtx" : "b.mtx")).string(), B, rep.scenario + " right-hand side");
  }
  io::write_text(o.out / "residuals.csv", io::residual_csv(run, B.cols() > 1));
  if (o.plot) io::write_text(o.out / "residuals.svg", io::convergence_svg(run, rep.scenario));
  io::write_text(o.out / "report.json", io::report_document({io::report_json(rep, kind)}).dump(2) + "\n");
}

inline void append(VerificationReport& rep, const Check& c) { rep.checks.push_back(c); }

// ---------------------------------------------------------------------------

inline bool mirroring(const Options& o, std::ostream& os) {
  const Index s = o.length;
  const FullPrescription p = flat_tail_prescription(s, o.seed);
  const io::Scenario sc = io::make_scenario("mirroring", p);
  const io::Construction c = io::build(sc);
  const FullConstruction& fc = std::get<FullConstruction>(c);
  const Index m = flat_tail_cycle_length(s);
  const RunTrace run = restarted_gmres(fc.A, fc.b, m, 2);

  VerificationReport rep = io::verify(sc, c);
  const MirroringReport mr = check_mirroring(run);
  append(rep, mr.check);

  os << "full GMRES prescription with a flat tail of length " << s << ", restarted with m = " << m << "\n";
  print_trace(os, run);
  for (const MirrorFinding& f : mr.findings) {
    os << "  cycle " << f.cycle + 1 << " ends with " << f.length << " stagnating step(s); cycle " << f.cycle + 2
       << " starts flat for " << f.mirrored << " step(s):";
    const auto& next = run.cycles[static_cast<std::size_t>(f.cycle + 1)].residual_norms;
    for (Index j = 0; j <= f.mirrored && j < static_cast<Index>(next.size()); ++j) os << " " << num(next[static_cast<std::size_t>(j)]);
    os << "\n";
  }
  print_checks(os, rep);
  emit(o, &sc, &c, fc.A, fc.b, run, rep, sc.kind);
  return rep.pass();
}

inline bool peak_plateau(const Options& o, std::ostream& os) {
  const ScalarPrescription p = random_scalar_prescription(3, 4, o.seed);
  const io::Scenario sc = io::make_scenario("peak-plateau", p);
  const io::Construction c = io::build(sc);
  const ScalarConstruction& x = std::get<ScalarConstruction>(c);
  const RunTrace run = restarted_gmres(x.A, x.b(), x.m, x.cycles);

  VerificationReport rep = io::verify(sc, c);
  const PeakPlateauReport pp = check_peak_plateau(run);
  append(rep, pp.check);

  os << "restarted GMRES(3), 4 cycles: GMRES residual, FOM residual and the ratio\n"
        "  1/||r_j^F||^2 against |eta_j|^2/||r_m||^4 (equal where FOM exists)\n";
  for (std::size_t k = 0; k < run.cycles.size(); ++k) {
    const CycleTrace& ct = run.cycles[k];
    const Matrix& T = ct.residual_coeffs.back();
    const double rm2 = T.squaredNorm();
    for (Index j = 0; j <= ct.steps(); ++j) {
      const double lhs = std::norm(T(j, 0)) / (rm2 * rm2);
      os << "  cycle " << k + 1 << " step " << j << ": gmres " << num(ct.residual_norms[static_cast<std::size_t>(j)]);
      if (ct.fom_exists[static_cast<std::size_t>(j)]) {
        const double f = ct.fom_nq[static_cast<std::size_t>(j)].matrix().norm();
        os << "  fom " << num(f) << "  " << num(1.0 / (f * f)) << " vs " << num(lhs);
      } else {
        os << "  fom does not exist";
      }
      os << "\n";
    }
  }
  os << "  steps checked: " << pp.steps_checked << ", FOM nonexistent: " << pp.nonexistent_steps << "\n";
  print_checks(os, rep);
  emit(o, &sc, &c, x.A, x.B, run, rep, sc.kind);
  return rep.pass();
}

inline bool rank_one_tail(const Options& o, std::ostream& os) {
  const ScalarPrescription p = random_scalar_prescription(3, 4, o.seed);
  ScenarioRng rng(o.seed + 17);
  const Matrix c_hat = rng.gaussian(p.n, 1);

  const io::Scenario base_sc = io::make_scenario("rank-one-tail-baseline", p);
  const io::Scenario sc = io::make_scenario("rank-one-tail", p, c_hat);
  const ScalarConstruction base = std::get<ScalarConstruction>(io::build(base_sc));
  const io::Construction c = io::build(sc);
  const ScalarConstruction& x = std::get<ScalarConstruction>(c);

  const RunTrace r0 = restarted_gmres(base.A, base.b(), p.m, p.cycles);
  const RunTrace r1 = restarted_gmres(x.A, x.b(), p.m, p.cycles);

  VerificationReport rep = io::verify(sc, c);
  double prefix = 0.0;
  for (std::size_t k = 0; k < r0.cycles.size(); ++k)
    for (std::size_t j = 0; j < r0.cycles[k].residual_norms.size(); ++j) {
      if (k + 1 == r0.cycles.size() && j + 1 == r0.cycles[k].residual_norms.size()) continue;
      prefix = std::max(prefix, std::abs(r0.cycles[k].residual_norms[j] - r1.cycles[k].residual_norms[j]) /
                                    r0.cycles[k].residual_norms[j]);
    }
  const double final_run = r1.cycles.back().residual_norms.back();
  const double closed = closed_form_residual(x, r1.X).norm();
  rep.add("prefix_unchanged", prefix, 1e-10);
  rep.add("closed_form_residual", std::abs(closed - final_run) / std::max(final_run, 1e-300), 1e-10);

  os << "restarted GMRES(3), 4 cycles, rank-one update c * e_n^T of the last column\n";
  os << "  baseline:";
  for (const auto& ct : r0.cycles) os << " |" << join(ct.residual_norms);
  os << "\n  updated: ";
  for (const auto& ct : r1.cycles) os << " |" << join(ct.residual_norms);
  os << "\n  largest change before the last step: " << num(prefix, 3) << "\n";
  os << "  final residual: baseline " << num(r0.cycles.back().residual_norms.back()) << ", updated " << num(final_run)
     << ", closed form " << num(closed) << "\n";
  print_checks(os, rep);
  emit(o, &sc, &c, x.A, x.B, r1, rep, sc.kind);
  return rep.pass();
}

inline bool block_directional_stagnation(const Options& o, std::ostream& os) {
  const DecoupledBlockSystem sys = decoupled_stagnation_system(o.length, o.seed);
  const RunTrace run = restarted_block_gmres(sys.A, sys.B, sys.M, sys.cycles);
  VerificationReport rep;
  rep.scenario = "block-directional-stagnation";
  const MirroringReport mr = check_mirroring(run);
  append(rep, mr.check);
  append(rep, check_rank(restarted_block_krylov_matrix(sys.A, sys.B, sys.M, sys.cycles)));

  os << "block GMRES, p = 2, two decoupled systems; the second stagnates at the end of cycle 1\n";
  print_trace(os, run);
  for (const StagnationEvent& ev : run.stagnation) {
    os << "  stagnation in cycle " << ev.cycle + 1 << " ending at step " << ev.step << ", length " << ev.length
       << (ev.total ? ", total" : ", along u =");
    if (!ev.total)
      for (Index i = 0; i < ev.direction.size(); ++i) os << " " << io::format_complex(ev.direction(i));
    os << (ev.end_of_cycle ? " (end of cycle)" : "") << "\n";
  }
  for (const MirrorFinding& f : mr.findings)
    os << "  mirrored at the start of cycle " << f.cycle + 2 << ": " << f.mirrored << " flat step(s), deviation "
       << num(f.deviation, 3) << "\n";
  print_checks(os, rep);
  emit(o, nullptr, nullptr, sys.A, sys.B, run, rep, io::Kind::restarted_block_gmres);
  return rep.pass();
}

inline bool rank_deficiency(const Options& o, std::ostream& os) {
  const Index s = o.length;
  const FullPrescription p = flat_tail_prescription(s, o.seed);
  const FullConstruction fc = construct_full_gmres(p);
  const Index m = flat_tail_cycle_length(s);
  const KrylovRankReport stag = restarted_krylov_matrix(fc.A, fc.b, m, 2);

  const ScalarPrescription q = random_scalar_prescription(3, 4, o.seed);
  const ScalarConstruction sc = construct_restarted(q);
  const KrylovRankReport fine = restarted_krylov_matrix(sc.A, sc.b(), q.m, q.cycles);

  VerificationReport rep;
  rep.scenario = "rank-deficiency";
  Check a = check_rank(stag);
  a.name = "krylov_rank_stagnating";
  Check b = check_rank(fine);
  b.name = "krylov_rank_strictly_decreasing";
  append(rep, a);
  append(rep, b);

  os << "restarted Krylov matrix [K^(1) ... K^(l)], column-normalized\n";
  os << "  flat tail of length " << s << ", m = " << m << ": rank " << stag.rank << " of " << stag.K.rows()
     << ", smallest |R_ii| " << num(stag.min_diag, 3) << " (threshold " << num(stag.threshold, 3) << ")\n";
  os << "  strictly decreasing, m = 3, 4 cycles: rank " << fine.rank << " of " << fine.K.rows() << ", smallest |R_ii| "
     << num(fine.min_diag, 3) << "\n";
  print_checks(os, rep);
  const io::Scenario scen = io::make_scenario("rank-deficiency", p);
  const io::Construction c = fc;
  emit(o, &scen, &c, fc.A, fc.b, stag.trace, rep, io::Kind::gmres);
  return rep.pass();
}

inline const std::map<std::string, std::function<bool(const Options&, std::ostream&)>>& registry() {
  static const std::map<std::string, std::function<bool(const Options&, std::ostream&)>> r{
      {"mirroring", mirroring},
      {"peak-plateau", peak_plateau},
      {"rank-one-tail", rank_one_tail},
      {"block-directional-stagnation", block_directional_stagnation},
      {"rank-deficiency", rank_deficiency},
  };
  return r;
}

}  // namespace demos
