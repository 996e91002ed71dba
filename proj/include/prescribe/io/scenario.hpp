#pragma once

/// \file prescribe/io/scenario.hpp
/// \brief Scenario files: JSON with a versioned "schema" key.
///
/// Complex numbers are written as [re, im] (a plain number is read as a real
/// value), matrices as arrays of rows. Errors name the offending key as a
/// JSON pointer.

#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "prescribe/block_prescriber.hpp"
#include "prescribe/io/matrix_market.hpp"
#include "prescribe/prescriber.hpp"
#include "prescribe/verifier.hpp"

namespace prescribe::io {

inline constexpr const char* kScenarioSchema = "prescribe.scenario/1";

using json = nlohmann::json;

class parse_error : public error {
 public:
  using error::error;
};

enum class Kind { gmres, restarted_gmres, block_gmres, restarted_block_gmres };

inline std::string to_string(Kind k) {
  switch (k) {
    case Kind::gmres: return "gmres";
    case Kind::restarted_gmres: return "restarted_gmres";
    case Kind::block_gmres: return "block_gmres";
    case Kind::restarted_block_gmres: return "restarted_block_gmres";
  }
  return "?";
}

inline bool is_block(Kind k) { return k == Kind::block_gmres || k == Kind::restarted_block_gmres; }
inline bool is_restarted(Kind k) { return k == Kind::restarted_gmres || k == Kind::restarted_block_gmres; }

using Prescription = std::variant<FullPrescription, ScalarPrescription, FullBlockPrescription, BlockPrescription>;

struct Scenario {
  std::string id;
  Kind kind = Kind::gmres;
  Index n = 0;
  Index p = 1;
  Index m = 0;       ///< cycle length (n for the unrestarted kinds)
  Index cycles = 1;
  Prescription prescription;
  std::optional<Matrix> tail;  ///< n x p, restarted kinds only
  Tolerances tolerances;
};

namespace detail {

/// A JSON value together with its location, for diagnostics.
class Node {
 public:
  Node(const json& j, std::string path, const std::string* source) : j_(&j), path_(std::move(path)), source_(source) {}

  [[noreturn]] void fail(const std::string& why) const {
    throw parse_error(*source_ + ": " + (path_.empty() ? "/" : path_) + ": " + why);
  }

  const json& raw() const { return *j_; }
  const std::string& path() const { return path_; }

  bool has(const std::string& key) const { return j_->is_object() && j_->contains(key); }

  Node at(const std::string& key) const {
    if (!j_->is_object()) fail("expected an object");
    if (!j_->contains(key)) fail("missing key '" + key + "'");
    return Node((*j_)[key], path_ + "/" + key, source_);
  }

  Node at(std::size_t i) const { return Node((*j_)[i], path_ + "/" + std::to_string(i), source_); }

  std::size_t size() const { return j_->size(); }

  std::vector<Node> array(std::optional<std::size_t> expected = std::nullopt) const {
    if (!j_->is_array()) fail("expected an array");
    if (expected && j_->size() != *expected)
      fail("expected " + std::to_string(*expected) + " entries, found " + std::to_string(j_->size()));
    std::vector<Node> out;
    for (std::size_t i = 0; i < j_->size(); ++i) out.push_back(at(i));
    return out;
  }

  void only_keys(const std::set<std::string>& allowed) const {
    if (!j_->is_object()) fail("expected an object");
    for (auto it = j_->begin(); it != j_->end(); ++it)
      if (!allowed.count(it.key())) fail("unknown key '" + it.key() + "'");
  }

  std::string str() const {
    if (!j_->is_string()) fail("expected a string");
    return j_->get<std::string>();
  }

  double real() const {
    if (!j_->is_number()) fail("expected a number");
    const double v = j_->get<double>();
    if (!std::isfinite(v)) fail("value is not finite");
    return v;
  }

  Index index(Index min = 0) const {
    if (!j_->is_number_integer()) fail("expected an integer");
    const auto v = j_->get<long long>();
    if (v < min) fail("must be at least " + std::to_string(min));
    return static_cast<Index>(v);
  }

  std::uint64_t seed() const {
    if (!j_->is_number_unsigned() && !(j_->is_number_integer() && j_->get<long long>() >= 0))
      fail("expected a non-negative integer");
    return j_->get<std::uint64_t>();
  }

  cplx complex() const {
    if (j_->is_number()) return real();
    if (!j_->is_array() || j_->size() != 2 || !(*j_)[0].is_number() || !(*j_)[1].is_number())
      fail("expected a number or an [re, im] pair");
    const cplx z((*j_)[0].get<double>(), (*j_)[1].get<double>());
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) fail("value is not finite");
    return z;
  }

  Multiset multiset(std::optional<std::size_t> expected = std::nullopt) const {
    Multiset s;
    for (const Node& e : array(expected)) s.push_back(e.complex());
    return s;
  }

  Matrix matrix(std::optional<Index> rows = std::nullopt, std::optional<Index> cols = std::nullopt) const {
    const std::vector<Node> r = array();
    if (r.empty()) fail("matrix has no rows");
    if (rows && static_cast<Index>(r.size()) != *rows)
      fail("expected " + std::to_string(*rows) + " rows, found " + std::to_string(r.size()));
    const std::size_t c = r.front().array().size();
    if (cols && static_cast<Index>(c) != *cols)
      fail("expected " + std::to_string(*cols) + " columns, found " + std::to_string(c));
    Matrix M(static_cast<Index>(r.size()), static_cast<Index>(c));
    for (std::size_t i = 0; i < r.size(); ++i) {
      const std::vector<Node> row = r[i].array(c);
      for (std::size_t j = 0; j < c; ++j) M(static_cast<Index>(i), static_cast<Index>(j)) = row[j].complex();
    }
    return M;
  }

  /// p x p upper-triangular block with real non-negative diagonal.
  NormalizingQuantity normalizing(Index p) const {
    const Matrix R = matrix(p, p);
    for (Index j = 0; j < p; ++j)
      for (Index i = j + 1; i < p; ++i)
        if (R(i, j) != cplx(0.0)) fail("entries below the diagonal must be zero");
    try {
      return NormalizingQuantity(R);
    } catch (const std::invalid_argument& e) {
      fail(e.what());
    }
  }

  MatrixPolynomialSpec polynomial(Index degree, Index p) const {
    only_keys({"solvents", "coeffs"});
    if (has("solvents") == has("coeffs")) fail("give exactly one of 'solvents' or 'coeffs'");
    const bool solv = has("solvents");
    std::vector<Matrix> ms;
    for (const Node& e : at(solv ? "solvents" : "coeffs").array(static_cast<std::size_t>(degree)))
      ms.push_back(e.matrix(p, p));
    return solv ? MatrixPolynomialSpec::from_solvents(std::move(ms)) : MatrixPolynomialSpec::from_coeffs(std::move(ms));
  }

 private:
  const json* j_;
  std::string path_;
  const std::string* source_;
};

inline BasisChoice parse_basis(const Node& node, const std::filesystem::path& base_dir, Index n) {
  const std::string kind = node.at("kind").str();
  if (kind == "standard") {
    node.only_keys({"kind"});
    return BasisChoice::standard_basis();
  }
  if (kind == "random_unitary") {
    node.only_keys({"kind", "seed"});
    return BasisChoice::random(node.at("seed").seed());
  }
  if (kind == "explicit") {
    node.only_keys({"kind", "file"});
    const Node file = node.at("file");
    Matrix Q;
    try {
      Q = read_matrix_market((base_dir / file.str()).string());
    } catch (const error& e) {
      file.fail(e.what());
    }
    if (Q.rows() != n || Q.cols() != n) file.fail("basis must be " + std::to_string(n) + " x " + std::to_string(n));
    if ((Q.adjoint() * Q - Matrix::Identity(n, n)).norm() > 1e-10) file.fail("basis is not unitary");
    return BasisChoice::explicit_basis(std::move(Q));
  }
  node.at("kind").fail("unknown basis kind '" + kind + "' (standard, random_unitary, explicit)");
}

inline Tolerances parse_tolerances(const Node& node) {
  node.only_keys({"trace", "ritz", "eigenvalues", "relation", "coupling", "warn_condition", "refuse_condition",
                  "widened"});
  Tolerances t;
  auto get = [&](const char* key, double& out) {
    if (!node.has(key)) return;
    const Node v = node.at(key);
    out = v.real();
    if (!(out > 0.0)) v.fail("tolerance must be positive");
  };
  get("trace", t.trace);
  get("ritz", t.ritz);
  get("eigenvalues", t.eigenvalues);
  get("relation", t.relation);
  get("coupling", t.coupling);
  get("warn_condition", t.warn_condition);
  get("refuse_condition", t.refuse_condition);
  get("widened", t.widened);
  return t;
}

}  // namespace detail

/// Parse a scenario document. `source` names it in diagnostics; `base_dir`
/// resolves relative file references (explicit basis).
inline Scenario parse_scenario(const json& doc, const std::string& source = "<scenario>",
                               const std::filesystem::path& base_dir = ".") {
  using detail::Node;
  const Node root(doc, "", &source);
  if (!doc.is_object()) root.fail("expected a JSON object");
  const std::string schema = root.at("schema").str();
  if (schema != kScenarioSchema) root.at("schema").fail("unsupported schema '" + schema + "', expected " + kScenarioSchema);

  Scenario s;
  s.id = root.has("id") ? root.at("id").str() : std::string("scenario");
  const Node kind = root.at("kind");
  const std::string k = kind.str();
  if (k == "gmres") s.kind = Kind::gmres;
  else if (k == "restarted_gmres") s.kind = Kind::restarted_gmres;
  else if (k == "block_gmres") s.kind = Kind::block_gmres;
  else if (k == "restarted_block_gmres") s.kind = Kind::restarted_block_gmres;
  else kind.fail("unknown kind '" + k + "' (gmres, restarted_gmres, block_gmres, restarted_block_gmres)");

  std::set<std::string> keys{"schema", "id", "kind", "n", "residuals", "ritz", "basis", "tolerances"};
  switch (s.kind) {
    case Kind::gmres: keys.insert("eigenvalues"); break;
    case Kind::restarted_gmres: keys.insert({"m", "cycles", "final_residual", "spectra", "tail"}); break;
    case Kind::block_gmres: keys.insert({"p", "spectrum"}); break;
    case Kind::restarted_block_gmres:
      keys.insert({"p", "M", "cycles", "final_residual", "spectra", "tail"});
      break;
  }
  root.only_keys(keys);
  if (root.has("tolerances")) s.tolerances = detail::parse_tolerances(root.at("tolerances"));

  const Node res = root.at("residuals");
  const Node ritz = root.at("ritz");

  switch (s.kind) {
    case Kind::gmres: {
      FullPrescription p;
      for (const Node& v : res.array()) p.f.push_back(v.real());
      s.n = s.m = p.n();
      if (s.n < 1) res.fail("at least one residual norm is needed");
      const auto rs = ritz.array(static_cast<std::size_t>(s.n - 1));
      for (std::size_t j = 0; j < rs.size(); ++j) p.ritz.push_back(rs[j].multiset(j + 1));
      p.eigenvalues = root.at("eigenvalues").multiset(static_cast<std::size_t>(s.n));
      s.prescription = std::move(p);
      break;
    }
    case Kind::restarted_gmres: {
      ScalarPrescription p;
      p.m = s.m = root.at("m").index(1);
      p.cycles = s.cycles = root.at("cycles").index(1);
      p.n = s.n = s.m * s.cycles;
      const auto cyc = res.array(static_cast<std::size_t>(s.cycles));
      const auto rc = ritz.array(static_cast<std::size_t>(s.cycles));
      for (Index c = 0; c < s.cycles; ++c) {
        std::vector<double> f;
        for (const Node& v : cyc[static_cast<std::size_t>(c)].array(static_cast<std::size_t>(s.m))) f.push_back(v.real());
        p.f.push_back(std::move(f));
        std::vector<Multiset> r;
        const auto steps = rc[static_cast<std::size_t>(c)].array(static_cast<std::size_t>(s.m));
        for (std::size_t j = 0; j < steps.size(); ++j) r.push_back(steps[j].multiset(j + 1));
        p.ritz.push_back(std::move(r));
      }
      if (root.has("final_residual")) p.final_residual = root.at("final_residual").real();
      if (root.has("spectra"))
        for (const Node& e : root.at("spectra").array(static_cast<std::size_t>(s.cycles)))
          p.spectra.push_back(e.multiset(static_cast<std::size_t>(s.m + 1)));
      s.prescription = std::move(p);
      break;
    }
    case Kind::block_gmres: {
      FullBlockPrescription p;
      p.p = s.p = root.at("p").index(1);
      for (const Node& v : res.array()) p.F.push_back(v.normalizing(s.p));
      const Index N = p.N();
      if (N < 1) res.fail("at least one residual block is needed");
      s.n = N * s.p;
      s.m = N;
      const auto rs = ritz.array(static_cast<std::size_t>(N - 1));
      for (std::size_t j = 0; j < rs.size(); ++j) p.ritz.push_back(rs[j].polynomial(static_cast<Index>(j + 1), s.p));
      p.spectrum = root.at("spectrum").polynomial(N, s.p);
      s.prescription = std::move(p);
      break;
    }
    case Kind::restarted_block_gmres: {
      BlockPrescription p;
      p.p = s.p = root.at("p").index(1);
      p.M = s.m = root.at("M").index(1);
      p.cycles = s.cycles = root.at("cycles").index(1);
      p.n = s.n = s.m * s.cycles * s.p;
      const auto cyc = res.array(static_cast<std::size_t>(s.cycles));
      const auto rc = ritz.array(static_cast<std::size_t>(s.cycles));
      for (Index c = 0; c < s.cycles; ++c) {
        std::vector<NormalizingQuantity> F;
        for (const Node& v : cyc[static_cast<std::size_t>(c)].array(static_cast<std::size_t>(s.m)))
          F.push_back(v.normalizing(s.p));
        p.F.push_back(std::move(F));
        std::vector<MatrixPolynomialSpec> r;
        const auto steps = rc[static_cast<std::size_t>(c)].array(static_cast<std::size_t>(s.m));
        for (std::size_t j = 0; j < steps.size(); ++j) r.push_back(steps[j].polynomial(static_cast<Index>(j + 1), s.p));
        p.ritz.push_back(std::move(r));
      }
      if (root.has("final_residual")) p.final_residual = root.at("final_residual").normalizing(s.p);
      if (root.has("spectra"))
        for (const Node& e : root.at("spectra").array(static_cast<std::size_t>(s.cycles)))
          p.spectra.push_back(e.polynomial(s.m + 1, s.p));
      s.prescription = std::move(p);
      break;
    }
  }

  if (root.has("n") && root.at("n").index(1) != s.n)
    root.at("n").fail("n = " + std::to_string(root.at("n").index(1)) + " does not match the prescription (" +
                      std::to_string(s.n) + ")");

  BasisChoice basis;
  if (root.has("basis")) basis = detail::parse_basis(root.at("basis"), base_dir, s.n);
  std::visit([&](auto& p) { p.basis = basis; }, s.prescription);

  if (root.has("tail")) {
    const Node t = root.at("tail");
    if (s.kind == Kind::restarted_gmres) {
      const Multiset v = t.multiset(static_cast<std::size_t>(s.n));
      Matrix c(s.n, 1);
      for (Index i = 0; i < s.n; ++i) c(i, 0) = v[static_cast<std::size_t>(i)];
      s.tail = c;
    } else {
      s.tail = t.matrix(s.n, s.p);
    }
  }
  return s;
}

inline Scenario parse_scenario_text(const std::string& text, const std::string& source = "<scenario>",
                                    const std::filesystem::path& base_dir = ".") {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw parse_error(source + ": " + e.what());
  }
  return parse_scenario(doc, source, base_dir);
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw parse_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

inline Scenario load_scenario(const std::filesystem::path& path) {
  return parse_scenario_text(read_text(path), path.string(), path.parent_path().empty() ? "." : path.parent_path());
}


// ---------------------------------------------------------------------------
// writing
// ---------------------------------------------------------------------------

namespace detail {

inline json cjson(cplx z) {
  if (z.imag() == 0.0) return z.real();
  return json::array({z.real(), z.imag()});
}

inline json mjson(const Matrix& M) {
  json rows = json::array();
  for (Index i = 0; i < M.rows(); ++i) {
    json r = json::array();
    for (Index j = 0; j < M.cols(); ++j) r.push_back(cjson(M(i, j)));
    rows.push_back(std::move(r));
  }
  return rows;
}

inline json sjson(const Multiset& s) {
  json a = json::array();
  for (const cplx& z : s) a.push_back(cjson(z));
  return a;
}

inline json pjson(const MatrixPolynomialSpec& spec) {
  json a = json::array();
  const bool solv = !spec.solvents.empty();
  for (const Matrix& M : solv ? spec.solvents : spec.coeffs) a.push_back(mjson(M));
  return {{solv ? "solvents" : "coeffs", std::move(a)}};
}

}  // namespace detail

/// Inverse of parse_scenario. An explicit basis is referenced as
/// `basis_file`; writing the matrix itself is up to the caller.
inline json scenario_json(const Scenario& s, const std::string& basis_file = "basis.mtx") {
  using namespace detail;
  json j{{"schema", kScenarioSchema}, {"id", s.id}, {"kind", to_string(s.kind)}, {"n", s.n}};
  const BasisChoice* basis = nullptr;
  std::visit(
      [&](const auto& p) {
        using P = std::decay_t<decltype(p)>;
        basis = &p.basis;
        if constexpr (std::is_same_v<P, FullPrescription>) {
          j["residuals"] = p.f;
          json r = json::array();
          for (const Multiset& t : p.ritz) r.push_back(sjson(t));
          j["ritz"] = std::move(r);
          j["eigenvalues"] = sjson(p.eigenvalues);
        } else if constexpr (std::is_same_v<P, ScalarPrescription>) {
          j["m"] = p.m;
          j["cycles"] = p.cycles;
          j["residuals"] = p.f;
          json r = json::array();
          for (const auto& cyc : p.ritz) {
            json c = json::array();
            for (const Multiset& t : cyc) c.push_back(sjson(t));
            r.push_back(std::move(c));
          }
          j["ritz"] = std::move(r);
          if (p.final_residual) j["final_residual"] = *p.final_residual;
          if (!p.spectra.empty()) {
            json sp = json::array();
            for (const Multiset& t : p.spectra) sp.push_back(sjson(t));
            j["spectra"] = std::move(sp);
          }
        } else if constexpr (std::is_same_v<P, FullBlockPrescription>) {
          j["p"] = p.p;
          json f = json::array();
          for (const NormalizingQuantity& q : p.F) f.push_back(mjson(q.matrix()));
          j["residuals"] = std::move(f);
          json r = json::array();
          for (const auto& t : p.ritz) r.push_back(pjson(t));
          j["ritz"] = std::move(r);
          j["spectrum"] = pjson(p.spectrum);
        } else {
          j["p"] = p.p;
          j["M"] = p.M;
          j["cycles"] = p.cycles;
          json f = json::array();
          json r = json::array();
          for (Index k = 0; k < p.cycles; ++k) {
            json fc = json::array();
            for (const NormalizingQuantity& q : p.F[static_cast<std::size_t>(k)]) fc.push_back(mjson(q.matrix()));
            f.push_back(std::move(fc));
            json rc = json::array();
            for (const auto& t : p.ritz[static_cast<std::size_t>(k)]) rc.push_back(pjson(t));
            r.push_back(std::move(rc));
          }
          j["residuals"] = std::move(f);
          j["ritz"] = std::move(r);
          if (p.final_residual) j["final_residual"] = mjson(p.final_residual->matrix());
          if (!p.spectra.empty()) {
            json sp = json::array();
            for (const auto& t : p.spectra) sp.push_back(pjson(t));
            j["spectra"] = std::move(sp);
          }
        }
      },
      s.prescription);
  switch (basis->kind) {
    case BasisChoice::Kind::standard: j["basis"] = {{"kind", "standard"}}; break;
    case BasisChoice::Kind::random_unitary: j["basis"] = {{"kind", "random_unitary"}, {"seed", basis->seed}}; break;
    case BasisChoice::Kind::explicit_unitary: j["basis"] = {{"kind", "explicit"}, {"file", basis_file}}; break;
  }
  if (s.tail) {
    if (s.kind == Kind::restarted_gmres) {
      json t = json::array();
      for (Index i = 0; i < s.tail->rows(); ++i) t.push_back(cjson((*s.tail)(i, 0)));
      j["tail"] = std::move(t);
    } else {
      j["tail"] = mjson(*s.tail);
    }
  }
  const Tolerances def;
  const Tolerances& t = s.tolerances;
  json tol = json::object();
  auto put = [&](const char* key, double v, double d) {
    if (v != d) tol[key] = v;
  };
  put("trace", t.trace, def.trace);
  put("ritz", t.ritz, def.ritz);
  put("eigenvalues", t.eigenvalues, def.eigenvalues);
  put("relation", t.relation, def.relation);
  put("coupling", t.coupling, def.coupling);
  put("warn_condition", t.warn_condition, def.warn_condition);
  put("refuse_condition", t.refuse_condition, def.refuse_condition);
  put("widened", t.widened, def.widened);
  if (!tol.empty()) j["tolerances"] = std::move(tol);
  return j;
}

/// Indented like dump(2), but arrays that hold no objects stay on one line.
inline std::string pretty(const json& j, int indent = 0) {
  const std::string pad(static_cast<std::size_t>(indent), ' ');
  const std::string inner(static_cast<std::size_t>(indent + 2), ' ');
  if (j.is_object()) {
    if (j.empty()) return "{}";
    std::string out = "{\n";
    std::size_t i = 0;
    for (auto it = j.begin(); it != j.end(); ++it, ++i)
      out += inner + json(it.key()).dump() + ": " + pretty(it.value(), indent + 2) + (i + 1 < j.size() ? ",\n" : "\n");
    return out + pad + "}";
  }
  if (j.is_array()) {
    bool flat = true;
    for (const json& e : j) flat = flat && e.dump().find('{') == std::string::npos;
    if (flat && j.dump().size() <= 100) return j.dump();
    std::string out = "[\n";
    for (std::size_t i = 0; i < j.size(); ++i) out += inner + pretty(j[i], indent + 2) + (i + 1 < j.size() ? ",\n" : "\n");
    return out + pad + "]";
  }
  return j.dump();
}

/// Wrap an in-memory prescription as a scenario.
template <class P>
Scenario make_scenario(std::string id, P prescription, std::optional<Matrix> tail = std::nullopt) {
  Scenario s;
  s.id = std::move(id);
  if constexpr (std::is_same_v<P, FullPrescription>) {
    s.kind = Kind::gmres;
    s.n = s.m = prescription.n();
  } else if constexpr (std::is_same_v<P, ScalarPrescription>) {
    s.kind = Kind::restarted_gmres;
    s.n = prescription.n;
    s.m = prescription.m;
    s.cycles = prescription.cycles;
  } else if constexpr (std::is_same_v<P, FullBlockPrescription>) {
    s.kind = Kind::block_gmres;
    s.p = prescription.p;
    s.m = prescription.N();
    s.n = s.m * s.p;
  } else {
    s.kind = Kind::restarted_block_gmres;
    s.p = prescription.p;
    s.n = prescription.n;
    s.m = prescription.M;
    s.cycles = prescription.cycles;
  }
  s.prescription = std::move(prescription);
  s.tail = std::move(tail);
  return s;
}

}  // namespace prescribe::io
