#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "prescribe/io/pipeline.hpp"
#include "prescribe/scenarios.hpp"
#include "support/oracles.hpp"

using namespace prescribe;

namespace {

const char* kMinimal = R"({
  "schema": "prescribe.scenario/1",
  "id": "minimal",
  "kind": "gmres",
  "residuals": [1, 0.5],
  "ritz": [[3]],
  "eigenvalues": [1, 2]
})";

std::string parse_message(const std::string& text) {
  try {
    io::parse_scenario_text(text, "s.json");
  } catch (const io::parse_error& e) {
    return e.what();
  }
  return {};
}

std::string mm_message(const std::string& text) {
  std::istringstream is(text);
  try {
    io::read_matrix_market(is, "m.mtx");
  } catch (const io::format_error& e) {
    return e.what();
  }
  return {};
}

std::set<std::string> keys(const io::json& j) {
  std::set<std::string> out;
  for (auto it = j.begin(); it != j.end(); ++it) out.insert(it.key());
  return out;
}

}  // namespace

TEST(MatrixMarket, RoundTripIsExact) {
  Matrix M = oracle::gaussian(5, 3, 1);
  M(0, 0) = cplx(1.0 / 3.0, -0.0);
  M(1, 1) = cplx(1e-300, 6.02e23);
  std::ostringstream os;
  io::write_matrix_market(os, M, "test");
  std::istringstream is(os.str());
  const Matrix R = io::read_matrix_market(is);
  EXPECT_EQ(R, M);
  EXPECT_EQ(os.str().rfind("%%MatrixMarket matrix array complex general", 0), 0u);
}

TEST(MatrixMarket, CoordinateSymmetricReal) {
  std::istringstream is(
      "%%MatrixMarket matrix coordinate real symmetric\n"
      "% comment\n"
      "3 3 3\n"
      "1 1 2.0\n"
      "3 1 -1.5\n"
      "2 2 4\n");
  const Matrix M = io::read_matrix_market(is);
  EXPECT_EQ(M(0, 0), cplx(2.0));
  EXPECT_EQ(M(2, 0), cplx(-1.5));
  EXPECT_EQ(M(0, 2), cplx(-1.5));
  EXPECT_EQ(M(1, 1), cplx(4.0));
  EXPECT_EQ(M(2, 2), cplx(0.0));
}

TEST(MatrixMarket, HermitianMirrorsConjugate) {
  std::istringstream is(
      "%%MatrixMarket matrix coordinate complex hermitian\n"
      "2 2 2\n"
      "1 1 1 0\n"
      "2 1 0.5 2\n");
  const Matrix M = io::read_matrix_market(is);
  EXPECT_EQ(M(1, 0), cplx(0.5, 2.0));
  EXPECT_EQ(M(0, 1), cplx(0.5, -2.0));
}

TEST(MatrixMarket, ErrorsCarryLineNumbers) {
  EXPECT_NE(mm_message("%%MatrixMarket matrix array real general\n2 1\n1.0\nabc\n").find("m.mtx:4:"),
            std::string::npos);
  EXPECT_NE(mm_message("%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1.0\n").find("m.mtx:3:"),
            std::string::npos);
  EXPECT_NE(mm_message("not a header\n").find("m.mtx:1:"), std::string::npos);
  EXPECT_NE(mm_message("%%MatrixMarket matrix array real general\n2 1\n1.0\n").find("m.mtx"), std::string::npos);
}

TEST(Scenario, ParsesMinimal) {
  const io::Scenario s = io::parse_scenario_text(kMinimal);
  EXPECT_EQ(s.kind, io::Kind::gmres);
  EXPECT_EQ(s.n, 2);
  const auto& p = std::get<FullPrescription>(s.prescription);
  EXPECT_EQ(p.f, (std::vector<double>{1.0, 0.5}));
  EXPECT_EQ(p.ritz[0][0], cplx(3.0));
}

TEST(Scenario, ErrorsNameTheKeyPath) {
  std::string text = kMinimal;
  text.replace(text.find("\"eigenvalues\""), 13, "\"eigenvalue\"");
  const std::string unknown = parse_message(text);
  EXPECT_NE(unknown.find("s.json"), std::string::npos);
  EXPECT_NE(unknown.find("eigenvalue"), std::string::npos);

  text = kMinimal;
  text.replace(text.find("[[3]]"), 5, "[[3, 4]]");
  EXPECT_NE(parse_message(text).find("/ritz/0"), std::string::npos);

  text = kMinimal;
  text.replace(text.find("scenario/1"), 10, "scenario/9");
  EXPECT_NE(parse_message(text).find("/schema"), std::string::npos);

  text = kMinimal;
  text.replace(text.find("0.5"), 3, "\"x\"");
  EXPECT_NE(parse_message(text).find("/residuals/1"), std::string::npos);

  const std::string syntax = parse_message("{\"schema\": ");
  EXPECT_NE(syntax.find("s.json"), std::string::npos);
  EXPECT_NE(syntax.find("line"), std::string::npos);
}

TEST(Scenario, JsonRoundTrip) {
  const auto check = [](const io::Scenario& s) {
    const io::json j = io::scenario_json(s);
    const io::Scenario back = io::parse_scenario(j);
    EXPECT_EQ(io::scenario_json(back), j) << s.id;
    const io::Construction a = io::build(s);
    const io::Construction b = io::build(back);
    EXPECT_EQ(io::operator_of(a), io::operator_of(b)) << s.id;
  };
  check(io::make_scenario("full", random_full_prescription(5, 1)));
  check(io::make_scenario("restarted", random_scalar_prescription(2, 3, 2), Matrix(oracle::gaussian(6, 1, 3))));
  check(io::make_scenario("block", random_block_prescription(2, 2, 2, 4)));
}

TEST(Csv, ScalarFormatAndValues) {
  const ScalarPrescription p = random_scalar_prescription(2, 2, 5);
  const ScalarConstruction c = construct_restarted(p);
  const RunTrace tr = restarted_gmres(c.A, c.b(), 2, 2);
  const std::string csv = io::residual_csv(tr, false);
  std::istringstream is(csv);
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, "cycle,iteration,resnorm");
  int rows = 0;
  while (std::getline(is, line)) {
    int k = 0, j = 0;
    double v = 0;
    ASSERT_EQ(std::sscanf(line.c_str(), "%d,%d,%lf", &k, &j, &v), 3) << line;
    if (j < 2) EXPECT_NEAR(v, p.f[k - 1][j], 1e-8 * p.f[k - 1][j]);
    ++rows;
  }
  EXPECT_EQ(rows, 6);
}

TEST(Csv, IdentityConvergesAfterOneStep) {
  const Matrix I = Matrix::Identity(4, 4);
  const RunTrace tr = restarted_gmres(I, oracle::gaussian(4, 1, 2), 3, 1);
  std::istringstream is(io::residual_csv(tr, false));
  std::vector<std::string> lines;
  for (std::string line; std::getline(is, line);) lines.push_back(line);
  ASSERT_EQ(lines.size(), 3u);
  int k = 0, j = 0;
  double v = 1.0;
  ASSERT_EQ(std::sscanf(lines[2].c_str(), "%d,%d,%lf", &k, &j, &v), 3);
  EXPECT_EQ(k, 1);
  EXPECT_EQ(j, 1);
  EXPECT_LT(v, 1e-14);
}

TEST(Csv, BlockFrobeniusMatchesEntries) {
  const BlockConstruction c = construct_restarted_block(random_block_prescription(2, 2, 2, 6));
  const std::string csv = io::residual_csv(restarted_block_gmres(c.A, c.B, 2, 2), true);
  std::istringstream is(csv);
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, "cycle,iteration,resnorm_fro,R_11,R_12,R_21,R_22");
  while (std::getline(is, line)) {
    std::vector<std::string> f;
    std::stringstream ls(line);
    for (std::string cell; std::getline(ls, cell, ',');) f.push_back(cell);
    ASSERT_EQ(f.size(), 7u);
    double sum = 0.0;
    for (std::size_t i = 3; i < 7; ++i) {
      double re = 0, im = 0;
      const int got = std::sscanf(f[i].c_str(), "%lf%lfi", &re, &im);
      ASSERT_GE(got, 1) << f[i];
      sum += re * re + im * im;
    }
    EXPECT_NEAR(std::stod(f[2]), std::sqrt(sum), 1e-12 * std::max(1.0, std::sqrt(sum)));
  }
}

TEST(Format, ComplexValues) {
  EXPECT_EQ(io::format_complex(cplx(1.5, -2.0)), "1.5-2i");
  EXPECT_EQ(io::format_complex(cplx(0.25, 0.0)), "0.25+0i");
  EXPECT_EQ(io::format_complex(cplx(-0.0, 3.0)), "0+3i");
}

TEST(Report, SameKeysForEveryKind) {
  std::vector<io::json> reports;
  const std::vector<io::Scenario> scenarios{
      io::make_scenario("full", random_full_prescription(4, 1)),
      io::make_scenario("restarted", random_scalar_prescription(2, 2, 2)),
      io::make_scenario("block", random_block_prescription(2, 1, 2, 3)),
  };
  for (const io::Scenario& s : scenarios) reports.push_back(io::report_json(io::verify(s, io::build(s)), s.kind));
  for (const io::json& r : reports) {
    EXPECT_EQ(keys(r), keys(reports.front()));
    EXPECT_TRUE(r.at("pass").get<bool>()) << r.dump();
    for (const io::json& c : r.at("checks")) EXPECT_EQ(keys(c), keys(reports.front().at("checks").front()));
  }
  const io::json doc = io::report_document(reports);
  EXPECT_EQ(doc.at("schema"), io::kReportSchema);
  EXPECT_TRUE(doc.at("pass").get<bool>());
}

TEST(Pipeline, SubstituteChecksShapes) {
  const io::Scenario s = io::make_scenario("full", random_full_prescription(4, 1));
  io::Construction c = io::build(s);
  EXPECT_THROW(io::substitute(c, Matrix::Identity(3, 3), Matrix::Zero(3, 1)), std::exception);
}
