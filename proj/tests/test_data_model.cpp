#include "doctest.h"

#include "pseudoreg/data_model.hpp"
#include "pseudoreg/error.hpp"
#include "pseudoreg/rng.hpp"

#include <numeric>
#include <random>

using namespace pseudoreg;

namespace {
const std::string kData = PSEUDOREG_DATA_DIR;

Dataset veteran() {
  const auto schema = load_schema(kData + "/veteran.schema.json");
  return load_csv(kData + "/veteran.csv", schema.csv);
}
}  // namespace

TEST_CASE("veteran fixture loads with its schema") {
  const auto schema = load_schema(kData + "/veteran.schema.json");
  const auto data = load_csv(kData + "/veteran.csv", schema.csv);
  CHECK(data.size() == 137);
  CHECK(data.censored_count() == 9);
  const auto X = encode_design(data, schema.design);
  CHECK(X.q() == 6);
  CHECK(X.column_names == std::vector<std::string>{"(Intercept)", "trt2", "celltypesmallcell", "celltypeadeno",
                                                    "celltypelarge", "age"});
  CHECK((X.rows.col(0).array() == 1.0).all());
}

TEST_CASE("minimal two-row file") {
  const auto d = parse_csv("time,status\n1,1\n2,0\n");
  CHECK(d.size() == 2);
  CHECK(d[0].is_event());
  CHECK_FALSE(d[1].is_event());
  CHECK(d.censored_count() == 1);
}

TEST_CASE("ingest errors") {
  SUBCASE("non-positive time cites the data row") {
    try {
      parse_csv("time,status\n1,1\n2,0\n-1,1\n");
      FAIL("expected a validation error");
    } catch (const ValidationError& e) {
      CHECK(e.row() == 3);
    }
  }
  SUBCASE("missing declared column") { CHECK_THROWS_AS(parse_csv("t,status\n1,1\n2,0\n"), SchemaError); }
  SUBCASE("unparsable cell") {
    try {
      parse_csv("time,status,x\n1,1,2\n2,0,3\n3,1,oops\n", CsvSchema{"time", "status", {{"x", ColumnKind::numeric}}});
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(e.row() == 3);
      CHECK(e.column() == "x");
    }
  }
  SUBCASE("missing values are rejected") { CHECK_THROWS_AS(parse_csv("time,status,x\n1,1,\n2,0,3\n"), ParseError); }
  SUBCASE("bad status") { CHECK_THROWS_AS(parse_csv("time,status\n1,2\n2,0\n"), ValidationError); }
  SUBCASE("single record") { CHECK_THROWS_AS(parse_csv("time,status\n1,1\n"), ValidationError); }
  SUBCASE("input errors share a family") {
    try {
      parse_csv("time,status\n0,1\n2,0\n");
    } catch (const Error& e) {
      CHECK(e.family() == Error::Family::input);
    }
  }
}

TEST_CASE("unknown columns are preserved and typed") {
  const auto d = parse_csv("time,status,grp,w\n1,1,a,0.5\n2,0,b,1.5\n");
  CHECK(d.covariate_names() == std::vector<std::string>{"grp", "w"});
  CHECK(std::holds_alternative<std::string>(d[0].covariates.at("grp")));
  CHECK(std::get<double>(d[1].covariates.at("w")) == 1.5);
}

TEST_CASE("intercept-only design") {
  const auto d = parse_csv("time,status\n1,1\n2,0\n3,1\n");
  const auto X = encode_design(d, DesignSpec{true, {}});
  CHECK(X.q() == 1);
  CHECK(X.n() == 3);
  CHECK((X.rows.array() == 1.0).all());
}

TEST_CASE("interaction column is the rowwise product") {
  const auto d = parse_csv("time,status,z1,z2\n1,1,1,1\n2,0,1,0\n3,1,0,1\n4,1,0,0\n");
  const auto X = encode_design(
      d, DesignSpec{true, {NumericTerm{"z1"}, NumericTerm{"z2"}, InteractionTerm{{"z1", "z2"}}}});
  REQUIRE(X.q() == 4);
  CHECK(X.column_names[3] == "z1:z2");
  for (Eigen::Index k = 0; k < X.n(); ++k) CHECK(X.rows(k, 3) == X.rows(k, 1) * X.rows(k, 2));
  CHECK(X.rows(0, 3) == 1.0);
}

TEST_CASE("design errors") {
  const auto d = parse_csv("time,status,g,h\n1,1,a,u\n2,0,a,v\n3,1,a,u\n");
  CHECK_THROWS_AS(encode_design(d, DesignSpec{true, {FactorTerm{"g", "a", {}}}}), DesignError);
  CHECK_THROWS_AS(encode_design(d, DesignSpec{true, {FactorTerm{"h", "w", {}}}}), SchemaError);
  CHECK_THROWS_AS(encode_design(d, DesignSpec{true, {NumericTerm{"nope"}}}), SchemaError);
  CHECK_THROWS_AS(encode_design(d, DesignSpec{true, {FactorTerm{"h", "u", {}}, FactorTerm{"h", "u", {}}}}),
                  DesignError);
  CHECK_THROWS_AS(encode_design(d, DesignSpec{true, {FactorTerm{"h", "u", {}}, InteractionTerm{{"h", "g"}}}}),
                  SchemaError);
}

TEST_CASE("unseen levels are rejected when reusing a layout") {
  const auto train = parse_csv("time,status,g\n1,1,a\n2,0,b\n");
  const auto test = parse_csv("time,status,g\n1,1,a\n2,0,c\n");
  const auto X = encode_design(train, DesignSpec{true, {FactorTerm{"g", "a", {}}}});
  CHECK_THROWS_AS(encode_with_layout(test, X.layout), ValidationError);
  const auto again = encode_with_layout(train, X.layout);
  CHECK(again.rows == X.rows);
}

TEST_CASE("dummy coding and permutation equivariance on veteran") {
  const auto schema = load_schema(kData + "/veteran.schema.json");
  const auto data = veteran();
  const auto X = encode_design(data, schema.design);
  for (Eigen::Index k = 0; k < X.n(); ++k) {
    const double block = X.rows(k, 2) + X.rows(k, 3) + X.rows(k, 4);
    const bool reference = std::get<std::string>(data[k].covariates.at("celltype")) == "squamous";
    CHECK(block == (reference ? 0.0 : 1.0));
  }
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 gen(7);
  std::shuffle(order.begin(), order.end(), gen);
  const auto Xp = encode_design(data.permuted(order), schema.design);
  for (std::size_t k = 0; k < order.size(); ++k)
    CHECK(Xp.rows.row(static_cast<Eigen::Index>(k)) == X.rows.row(static_cast<Eigen::Index>(order[k])));
}

TEST_CASE("column count matches the closed form for random specs") {
  Rng rng(2024);
  std::uniform_int_distribution<int> levels(2, 5), coin(0, 1);
  for (int rep = 0; rep < 100; ++rep) {
    const int la = levels(rng), lb = levels(rng);
    std::string csv = "time,status,fa,fb,x,y\n";
    for (int i = 0; i < 30; ++i) {
      csv += std::to_string(i + 1) + ",1,a" + std::to_string(i % la) + ",b" + std::to_string(i % lb) + "," +
             std::to_string(rng.uniform()) + "," + std::to_string(rng.uniform()) + "\n";
    }
    const auto d = parse_csv(csv);
    DesignSpec spec{coin(rng) == 1, {NumericTerm{"y"}}};
    const bool with_fa = coin(rng), with_fb = coin(rng);
    if (with_fa) spec.terms.push_back(FactorTerm{"fa", "a0", {}});
    if (with_fb) spec.terms.push_back(FactorTerm{"fb", "b0", {}});
    if (coin(rng)) spec.terms.push_back(NumericTerm{"x"});
    if (with_fa && coin(rng)) spec.terms.push_back(InteractionTerm{{"fa", "y"}});
    if (with_fa && with_fb && coin(rng)) spec.terms.push_back(InteractionTerm{{"fa", "fb"}});
    const std::map<std::string, std::size_t> lv{{"fa", static_cast<std::size_t>(la)},
                                                {"fb", static_cast<std::size_t>(lb)}};
    const auto X = encode_design(d, spec);
    CHECK(static_cast<std::size_t>(X.q()) == expected_column_count(spec, lv));
  }
}

TEST_CASE("schema JSON and inference") {
  const auto s = parse_schema(R"({"time":"t","status":"d","terms":[{"numeric":"x"}]})");
  CHECK(s.csv.time_column == "t");
  CHECK(s.design.intercept);
  CHECK_THROWS_AS(parse_schema("{not json"), SchemaError);
  CHECK_THROWS_AS(parse_schema(R"({"terms":[{"weird":"x"}]})"), SchemaError);
  const auto d = parse_csv("time,status,g,x\n1,1,b,1\n2,0,a,2\n3,1,c,3\n");
  const auto inferred = infer_schema(d);
  const auto X = encode_design(d, inferred.design);
  CHECK(X.column_names == std::vector<std::string>{"(Intercept)", "gb", "gc", "x"});
}
