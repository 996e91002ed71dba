#pragma once

/// \file prescribe/io/pipeline.hpp
/// \brief Scenario -> construction -> artifacts -> verification, as used by
/// the command line tool.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "prescribe/io/matrix_market.hpp"
#include "prescribe/io/scenario.hpp"
#include "prescribe/krylov_engine.hpp"
#include "prescribe/verifier.hpp"

namespace prescribe::io {

inline constexpr const char* kManifestSchema = "prescribe.construction/1";
inline constexpr const char* kReportSchema = "prescribe.report/1";

using Construction = std::variant<FullConstruction, ScalarConstruction, FullBlockConstruction, BlockConstruction>;

/// Throws inadmissible_error with the validator's report.
inline Construction build(const Scenario& s) {
  auto with_tail = [&](auto c) {
    if (s.tail) static_cast<RestartedConstruction&>(c) = tail_rank_one(c, *s.tail);
    return c;
  };
  switch (s.kind) {
    case Kind::gmres: return construct_full_gmres(std::get<FullPrescription>(s.prescription));
    case Kind::restarted_gmres: return with_tail(construct_restarted(std::get<ScalarPrescription>(s.prescription)));
    case Kind::block_gmres: return construct_full_block_gmres(std::get<FullBlockPrescription>(s.prescription));
    case Kind::restarted_block_gmres:
      return with_tail(construct_restarted_block(std::get<BlockPrescription>(s.prescription)));
  }
  throw error("unknown scenario kind");
}

inline AdmissibilityReport validate(const Scenario& s) {
  return std::visit(
      [](const auto& p) {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, FullPrescription> || std::is_same_v<P, ScalarPrescription>)
          return validate_admissible(p);
        else
          return validate_block_admissible(p);
      },
      s.prescription);
}

inline const Matrix& operator_of(const Construction& c) {
  return std::visit([](const auto& x) -> const Matrix& { return x.A; }, c);
}

inline Matrix rhs_of(const Construction& c) {
  return std::visit(
      [](const auto& x) -> Matrix {
        if constexpr (std::is_same_v<std::decay_t<decltype(x)>, FullConstruction>)
          return x.b;
        else
          return x.B;
      },
      c);
}

/// Replace the operator and right-hand side, e.g. by the ones read back from
/// disk, keeping the rest of the construction for the structural checks.
inline void substitute(Construction& c, const Matrix& A, const Matrix& B) {
  std::visit(
      [&](auto& x) {
        if (A.rows() != x.A.rows() || A.cols() != x.A.cols())
          throw error("operator is " + std::to_string(A.rows()) + " x " + std::to_string(A.cols()) + ", expected " +
                      std::to_string(x.A.rows()) + " x " + std::to_string(x.A.cols()));
        x.A = A;
        if constexpr (std::is_same_v<std::decay_t<decltype(x)>, FullConstruction>) {
          if (B.rows() != x.b.rows() || B.cols() != 1) throw error("right-hand side has the wrong shape");
          x.b = B.col(0);
        } else {
          if (B.rows() != x.B.rows() || B.cols() != x.B.cols()) throw error("right-hand side has the wrong shape");
          x.B = B;
        }
      },
      c);
}

inline VerificationReport verify(const Scenario& s, const Construction& c) {
  VerificationReport rep = std::visit(
      [&](const auto& x) -> VerificationReport {
        using C = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<C, FullConstruction>)
          return verify_full(x, std::get<FullPrescription>(s.prescription), s.tolerances);
        else if constexpr (std::is_same_v<C, ScalarConstruction>)
          return verify_scalar(x, std::get<ScalarPrescription>(s.prescription), s.tolerances);
        else if constexpr (std::is_same_v<C, FullBlockConstruction>)
          return verify_full_block(x, std::get<FullBlockPrescription>(s.prescription), s.tolerances);
        else
          return verify_block(x, std::get<BlockPrescription>(s.prescription), s.tolerances);
      },
      c);
  rep.scenario = s.id;
  return rep;
}

// ---------------------------------------------------------------------------
// JSON
// ---------------------------------------------------------------------------

inline json complex_json(cplx z) { return json::array({z.real(), z.imag()}); }

inline json multiset_json(const Multiset& s) {
  json a = json::array();
  for (const cplx& z : s) a.push_back(complex_json(z));
  return a;
}

/// Non-finite deviations are written as null.
inline json number_json(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline json report_json(const VerificationReport& rep, Kind kind) {
  json checks = json::array();
  for (const Check& c : rep.checks) {
    checks.push_back({{"name", c.name},
                      {"pass", c.pass},
                      {"deviation", number_json(c.deviation)},
                      {"tolerance", number_json(c.tolerance)},
                      {"detail", c.detail}});
  }
  return {{"scenario", rep.scenario},
          {"kind", to_string(kind)},
          {"pass", rep.pass()},
          {"checks", std::move(checks)},
          {"warnings", rep.warnings}};
}

inline json report_document(const std::vector<json>& reports) {
  bool pass = !reports.empty();
  for (const json& r : reports) pass = pass && r.at("pass").get<bool>();
  return {{"schema", kReportSchema}, {"pass", pass}, {"reports", reports}};
}

inline json violations_json(const AdmissibilityReport& rep) {
  json a = json::array();
  for (const Violation& v : rep.violations) {
    json o{{"code", v.code}, {"message", v.message}, {"cycle", v.cycle}, {"step", v.step}};
    if (v.witness) {
      json w = json::array();
      for (Index i = 0; i < v.witness->size(); ++i) w.push_back(complex_json((*v.witness)(i)));
      o["witness"] = std::move(w);
    }
    a.push_back(std::move(o));
  }
  return a;
}

// ---------------------------------------------------------------------------
// artifacts
// ---------------------------------------------------------------------------

inline std::string rhs_file(const Scenario& s) { return is_block(s.kind) ? "B.mtx" : "b.mtx"; }

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw error("cannot open " + path.string() + " for writing");
  os << text;
  if (!os) throw error("write to " + path.string() + " failed");
}

/// Writes A, the right-hand side, the cycle Hessenberg matrices H and their
/// similarity factors T (H = T C T^-1) per cycle, and manifest.json.
inline void write_construction(const std::filesystem::path& dir, const Scenario& s, const Construction& c) {
  std::filesystem::create_directories(dir);
  write_matrix_market((dir / "A.mtx").string(), operator_of(c), s.id + " operator");
  write_matrix_market((dir / rhs_file(s)).string(), rhs_of(c), s.id + " right-hand side");

  std::vector<std::pair<Matrix, Matrix>> factors;  // (H, T)
  std::vector<double> cond_T;
  double cond_V = 1.0;
  Multiset eigenvalues;
  std::visit(
      [&](const auto& x) {
        using C = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<C, FullConstruction> || std::is_same_v<C, FullBlockConstruction>) {
          factors.emplace_back(x.factor.H, x.factor.T());
          cond_T.push_back(x.factor.cond_T);
          eigenvalues = eig(x.factor.H);
        } else {
          for (const auto& f : x.factors) factors.emplace_back(f.H, f.T());
          cond_T = x.cond_T;
          cond_V = x.cond_V;
          eigenvalues = eigenvalues_from_blocks(x);
        }
      },
      c);

  json files = {{"A", "A.mtx"}, {"rhs", rhs_file(s)}};
  json fj = json::array();
  for (std::size_t k = 0; k < factors.size(); ++k) {
    const std::string tag = "cycle" + std::to_string(k + 1);
    write_matrix_market((dir / (tag + "_H.mtx")).string(), factors[k].first, tag + " Hessenberg matrix");
    write_matrix_market((dir / (tag + "_T.mtx")).string(), factors[k].second, tag + " similarity factor");
    fj.push_back({{"H", tag + "_H.mtx"}, {"T", tag + "_T.mtx"}});
  }
  files["factors"] = std::move(fj);

  std::sort(eigenvalues.begin(), eigenvalues.end(), [](const cplx& a, const cplx& b) {
    return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag();
  });
  const json manifest = {{"schema", kManifestSchema},
                         {"scenario", s.id},
                         {"kind", to_string(s.kind)},
                         {"n", s.n},
                         {"p", s.p},
                         {"cycle_length", s.m},
                         {"cycles", s.cycles},
                         {"tail", s.tail.has_value()},
                         {"files", std::move(files)},
                         {"cond_T", cond_T},
                         {"cond_V", cond_V},
                         {"eigenvalues", multiset_json(eigenvalues)}};
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// residual curves
// ---------------------------------------------------------------------------

inline std::string format_complex(cplx z) {
  const double im = z.imag() == 0.0 ? 0.0 : z.imag();
  return detail::fmt17(z.real()) + (std::signbit(im) ? "-" : "+") + detail::fmt17(std::abs(im)) + "i";
}

/// `cycle,iteration,resnorm`, or for block runs `resnorm_fro` followed by the
/// p^2 entries of R_j row by row. Cycles count from 1; iteration 0 is the
/// residual the cycle starts from.
inline std::string residual_csv(const RunTrace& tr, bool block) {
  std::ostringstream os;
  const Index p = tr.p;
  os << "cycle,iteration," << (block ? "resnorm_fro" : "resnorm");
  if (block)
    for (Index i = 1; i <= p; ++i)
      for (Index j = 1; j <= p; ++j) os << ",R_" << i << j;
  os << "\n";
  for (std::size_t k = 0; k < tr.cycles.size(); ++k) {
    const CycleTrace& ct = tr.cycles[k];
    for (std::size_t j = 0; j < ct.residual_norms.size(); ++j) {
      os << (k + 1) << "," << j << "," << detail::fmt17(ct.residual_norms[j]);
      if (block) {
        const Matrix& R = ct.residual_nq[j].matrix();
        for (Index r = 0; r < p; ++r)
          for (Index q = 0; q < p; ++q) os << "," << format_complex(r <= q ? R(r, q) : cplx(0.0));
      }
      os << "\n";
    }
  }
  return os.str();
}

/// Single convergence curve, log10 of the residual norm over the global
/// iteration count.
inline std::string convergence_svg(const RunTrace& tr, const std::string& title) {
  std::vector<std::pair<double, double>> pts;
  Index offset = 0;
  for (const CycleTrace& ct : tr.cycles) {
    for (std::size_t j = 0; j < ct.residual_norms.size(); ++j) {
      if (j == 0 && offset > 0) continue;  // same as the previous cycle's last point
      const double r = std::max(ct.residual_norms[j], 1e-300);
      pts.emplace_back(static_cast<double>(offset + static_cast<Index>(j)), std::log10(r));
    }
    offset += ct.steps();
  }
  const double W = 640, Hh = 400, L = 70, R = 20, T = 40, B = 50;
  double xmax = 1, ymin = 0, ymax = 0;
  for (auto [x, y] : pts) {
    xmax = std::max(xmax, x);
    ymin = std::min(ymin, std::floor(std::max(y, -20.0)));
    ymax = std::max(ymax, std::ceil(y));
  }
  if (ymax <= ymin) ymax = ymin + 1;
  auto sx = [&](double x) { return L + (W - L - R) * x / xmax; };
  auto sy = [&](double y) { return T + (Hh - T - B) * (ymax - std::max(y, ymin)) / (ymax - ymin); };
  auto num = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return std::string(buf);
  };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << Hh << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << title << "</text>\n";
  os << "<line x1=\"" << L << "\" y1=\"" << Hh - B << "\" x2=\"" << W - R << "\" y2=\"" << Hh - B << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << Hh - B << "\" stroke=\"black\"/>\n";
  for (double y = ymin; y <= ymax; y += 1.0)
    os << "<text x=\"" << L - 6 << "\" y=\"" << num(sy(y) + 4) << "\" text-anchor=\"end\">1e" << static_cast<int>(y) << "</text>\n";
  const Index m = std::max<Index>(tr.cycle_length, 1);
  for (Index x = 0; x <= static_cast<Index>(xmax); x += m)
    os << "<line x1=\"" << num(sx(static_cast<double>(x))) << "\" y1=\"" << T << "\" x2=\"" << num(sx(static_cast<double>(x)))
       << "\" y2=\"" << Hh - B << "\" stroke=\"#ddd\"/>\n"
       << "<text x=\"" << num(sx(static_cast<double>(x))) << "\" y=\"" << Hh - B + 16 << "\" text-anchor=\"middle\">" << x << "</text>\n";
  os << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << Hh - 12 << "\" text-anchor=\"middle\">iteration</text>\n";
  os << "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"2\" points=\"";
  for (std::size_t i = 0; i < pts.size(); ++i) os << (i ? " " : "") << num(sx(pts[i].first)) << "," << num(sy(pts[i].second));
  os << "\"/>\n</svg>\n";
  return os.str();
}

}  // namespace prescribe::io
