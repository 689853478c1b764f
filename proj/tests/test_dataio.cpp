#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "loaddev/dataio.hpp"
#include "loaddev/doe.hpp"
#include "loaddev/errors.hpp"
#include "loaddev/fdist.hpp"
#include "loaddev/linmod.hpp"
#include "test_util.hpp"

using loaddev::ComputationError;
using loaddev::ValidationError;
namespace dio = loaddev::dataio;
namespace doe = loaddev::doe;
namespace lm = loaddev::linmod;

namespace {

doe::DesignPlan tiny_plan(std::uint64_t seed = 11) {
  doe::PlanSkeleton skeleton;
  skeleton.factors = {{"seating_depth", "in", {0.01, 0.02}},
                      {"powder_charge", "gr", {25.5, 25.6}}};
  skeleton.blocks = {"1", "2"};
  skeleton.cases_per_block = 4;  // equals the cell count: one case per cell per block
  return doe::randomize_assignment(skeleton, seed);
}

dio::CartridgeRecord make_cartridge(const doe::DesignPlan& plan, const doe::Assignment& a,
                                    int i) {
  dio::CartridgeRecord rec;
  rec.case_id = a.case_id;
  rec.lot = a.block;
  const doe::LevelTuple& levels = plan.level_of(a);
  rec.seating_depth = levels[0];
  rec.powder_charge = levels[1];
  rec.case_length = 1.75 + 0.001 * i;
  rec.neck_inner_diameter = 0.22;
  rec.neck_outer_diameter = 0.2414;
  rec.neck_thickness = 0.0114;
  rec.head_space = -8.4 + 0.1 * i;
  rec.primer_pocket_depth = 0.119;
  rec.primer_pocket_diameter = 0.171;
  rec.case_weight = 92.9 + 0.05 * i;
  rec.case_volume = 45.8 + 0.01 * i;
  rec.primer_weight = 3.26;
  rec.bullet_overall_length = 0.81;
  rec.bullet_weight = 55.0;
  rec.case_mouth_square = (i % 2 == 0) ? 1.0 : 0.0;
  return rec;
}

std::vector<dio::CartridgeRecord> make_cartridges(const doe::DesignPlan& plan) {
  std::vector<dio::CartridgeRecord> out;
  int i = 0;
  for (const doe::Assignment& a : plan.assignments) out.push_back(make_cartridge(plan, a, i++));
  return out;
}

std::vector<dio::ShotRecord> make_shots(const doe::DesignPlan& plan, int per_case) {
  std::vector<dio::ShotRecord> out;
  long seq = 1;
  int i = 0;
  for (const doe::Assignment& a : plan.assignments) {
    for (int k = 0; k < per_case; ++k) {
      dio::ShotRecord s;
      s.case_id = a.case_id;
      s.target_id = "T" + std::to_string(i + 1);
      s.x = 0.3 * k + 0.07 * i;
      s.y = 0.2 * k - 0.05 * i;
      s.seq = seq++;
      if (k == 0) s.velocity = 3200.0 + i;
      out.push_back(s);
    }
    ++i;
  }
  return out;
}

struct Fixture {
  testutil::TempDir dir;
  std::string shots_path, cartridges_path, plan_path;

  Fixture(const doe::DesignPlan& plan, const std::vector<dio::CartridgeRecord>& cartridges,
          const std::vector<dio::ShotRecord>& shots)
      : shots_path(dir.file("shots.csv")),
        cartridges_path(dir.file("cartridges.csv")),
        plan_path(dir.file("plan.csv")) {
    doe::save_plan(plan, plan_path);
    dio::save_cartridges(cartridges, cartridges_path);
    dio::save_shots(shots, shots_path);
  }

  dio::Dataset load() const { return dio::load_dataset(shots_path, cartridges_path, plan_path); }
};

}  // namespace

TEST_SUITE("dataio") {
  TEST_CASE("covariate registry orders are fixed") {
    const std::vector<std::string> schema = {
        "case_length",         "neck_inner_diameter", "neck_outer_diameter",
        "neck_thickness",      "head_space",          "primer_pocket_depth",
        "primer_pocket_diameter", "case_weight",      "case_volume",
        "primer_weight",       "bullet_overall_length", "bullet_weight",
        "case_mouth_square"};
    const auto& fields = dio::covariate_schema_fields();
    REQUIRE(fields.size() == 13);
    for (std::size_t i = 0; i < 13; ++i) CHECK(fields[i].name == schema[i]);

    const std::vector<std::string> stats = dio::covariate_stats_order();
    REQUIRE(stats.size() == 13);
    CHECK(stats[7] == "case_weight");
    CHECK(stats[8] == "case_mouth_square");
    CHECK(stats[9] == "case_volume");
    CHECK(stats[12] == "bullet_weight");

    const std::vector<std::string> model = dio::covariate_model_order();
    REQUIRE(model.size() == 13);
    CHECK(model[0] == "case_length");
    CHECK(model[1] == "case_mouth_square");
    // The model enters bullet weight before bullet overall length.
    CHECK(model[11] == "bullet_weight");
    CHECK(model[12] == "bullet_overall_length");

    CHECK(dio::covariate_field("head_space").display == std::string("Head Space"));
    CHECK_THROWS_AS(dio::covariate_field("no_such"), ValidationError);
  }

  TEST_CASE("cartridges round-trip exactly") {
    testutil::TempDir dir;
    const doe::DesignPlan plan = tiny_plan();
    const std::vector<dio::CartridgeRecord> cartridges = make_cartridges(plan);
    const std::string path = dir.file("c.csv");
    dio::save_cartridges(cartridges, path);
    const std::vector<dio::CartridgeRecord> back = dio::load_cartridges(path);
    REQUIRE(back.size() == cartridges.size());
    for (std::size_t i = 0; i < back.size(); ++i) {
      CHECK(back[i].case_id == cartridges[i].case_id);
      CHECK(back[i].lot == cartridges[i].lot);
      CHECK(back[i].seating_depth == cartridges[i].seating_depth);
      CHECK(back[i].powder_charge == cartridges[i].powder_charge);
      for (const auto& f : dio::covariate_schema_fields()) {
        CHECK(back[i].*(f.member) == cartridges[i].*(f.member));
      }
    }
  }

  TEST_CASE("dataset files round-trip byte-identically") {
    const doe::DesignPlan plan = tiny_plan();
    Fixture fx(plan, make_cartridges(plan), make_shots(plan, 3));
    const dio::Dataset ds = fx.load();
    CHECK(ds.shots.size() == 24);
    CHECK(ds.cartridges.size() == 8);

    testutil::TempDir dir2;
    const std::string s2 = dir2.file("shots.csv");
    const std::string c2 = dir2.file("cartridges.csv");
    const std::string p2 = dir2.file("plan.csv");
    dio::save_dataset(ds, s2, c2, p2);
    CHECK(testutil::slurp(s2) == testutil::slurp(fx.shots_path));
    CHECK(testutil::slurp(c2) == testutil::slurp(fx.cartridges_path));
    CHECK(testutil::slurp(p2) == testutil::slurp(fx.plan_path));
    CHECK(testutil::slurp(p2 + ".json") == testutil::slurp(fx.plan_path + ".json"));
  }

  TEST_CASE("optional shot fields survive the round trip") {
    const doe::DesignPlan plan = tiny_plan();
    const dio::Dataset ds = Fixture(plan, make_cartridges(plan), make_shots(plan, 2)).load();
    int with_velocity = 0;
    for (const auto& s : ds.shots) {
      if (s.velocity) ++with_velocity;
      CHECK(s.valid);
      CHECK(s.invalid_reason.empty());
    }
    CHECK(with_velocity == 8);  // one per case
    CHECK(ds.shots[0].velocity.has_value());
    CHECK(*ds.shots[0].velocity == 3200.0);
  }

  TEST_CASE("a shots file without optional columns loads as all valid") {
    const doe::DesignPlan plan = tiny_plan();
    Fixture fx(plan, make_cartridges(plan), make_shots(plan, 1));
    testutil::spit(fx.shots_path,
                   "case_id,target_id,x,y,seq\n" + plan.assignments[0].case_id +
                       ",T1,0.1,0.2,1\n");
    const dio::Dataset ds = fx.load();
    REQUIRE(ds.shots.size() == 1);
    CHECK(ds.shots[0].valid);
    CHECK_FALSE(ds.shots[0].velocity.has_value());
  }

  TEST_CASE("cartridge_of joins shots to their cartridge") {
    const doe::DesignPlan plan = tiny_plan();
    const dio::Dataset ds = Fixture(plan, make_cartridges(plan), make_shots(plan, 2)).load();
    for (const auto& s : ds.shots) {
      const dio::CartridgeRecord& c = ds.cartridge_of(s);
      CHECK(c.case_id == s.case_id);
    }
    dio::ShotRecord stray;
    stray.case_id = "L9-C999";
    stray.seq = 1;
    CHECK_THROWS_WITH_AS(ds.cartridge_of(stray), doctest::Contains("unknown case"),
                         ValidationError);
  }

  TEST_CASE("join rejects duplicate cases, unknown cases, and plan mismatches") {
    const doe::DesignPlan plan = tiny_plan();
    const std::vector<dio::CartridgeRecord> cartridges = make_cartridges(plan);
    const std::vector<dio::ShotRecord> shots = make_shots(plan, 1);

    SUBCASE("duplicate cartridge") {
      std::vector<dio::CartridgeRecord> dup = cartridges;
      dup.push_back(dup.front());
      Fixture fx(plan, dup, shots);
      CHECK_THROWS_WITH_AS(fx.load(), doctest::Contains("duplicate case_id"), ValidationError);
    }
    SUBCASE("cartridge not in the plan") {
      std::vector<dio::CartridgeRecord> extra = cartridges;
      extra.push_back(cartridges.front());
      extra.back().case_id = "L1-C999";
      Fixture fx(plan, extra, shots);
      CHECK_THROWS_WITH_AS(fx.load(), doctest::Contains("not in the plan"), ValidationError);
    }
    SUBCASE("lot contradicts the plan block") {
      std::vector<dio::CartridgeRecord> bad = cartridges;
      bad.front().lot = (bad.front().lot == "1") ? "2" : "1";
      Fixture fx(plan, bad, shots);
      CHECK_THROWS_WITH_AS(fx.load(), doctest::Contains("lot"), ValidationError);
    }
    SUBCASE("levels contradict the plan assignment") {
      std::vector<dio::CartridgeRecord> bad = cartridges;
      bad.front().powder_charge += 0.1;
      Fixture fx(plan, bad, shots);
      CHECK_THROWS_AS(fx.load(), ValidationError);
    }
    SUBCASE("shot for a case that does not exist") {
      std::vector<dio::ShotRecord> bad = shots;
      bad.front().case_id = "L1-C999";
      Fixture fx(plan, cartridges, bad);
      CHECK_THROWS_WITH_AS(fx.load(), doctest::Contains("unknown case"), ValidationError);
    }
  }

  TEST_CASE("shot parsing enforces seq uniqueness and reason consistency") {
    const doe::DesignPlan plan = tiny_plan();
    const std::vector<dio::CartridgeRecord> cartridges = make_cartridges(plan);
    const std::string case0 = plan.assignments[0].case_id;
    auto try_shots = [&](const std::string& body) {
      Fixture fx(plan, cartridges, make_shots(plan, 1));
      testutil::spit(fx.shots_path, body);
      return fx.load();
    };
    const std::string header = "case_id,target_id,x,y,seq,velocity,valid,invalid_reason\n";
    CHECK_THROWS_WITH_AS(
        try_shots(header + case0 + ",T1,0,0,1,,1,\n" + case0 + ",T1,1,1,1,,1,\n"),
        doctest::Contains("duplicate seq"), ValidationError);
    CHECK_THROWS_WITH_AS(try_shots(header + case0 + ",T1,0,0,0,,1,\n"),
                         doctest::Contains("1-based"), ValidationError);
    CHECK_THROWS_WITH_AS(try_shots(header + case0 + ",T1,0,0,1,,0,bad_reason\n"),
                         doctest::Contains("unknown invalidation reason"), ValidationError);
    // valid and invalid_reason must agree in both directions.
    CHECK_THROWS_AS(try_shots(header + case0 + ",T1,0,0,1,,0,\n"), ValidationError);
    CHECK_THROWS_AS(try_shots(header + case0 + ",T1,0,0,1,,1,tumbled\n"), ValidationError);
    // A well-formed invalid shot loads.
    const dio::Dataset ds = try_shots(header + case0 + ",T1,0,0,1,,0,tumbled\n");
    REQUIRE(ds.shots.size() == 1);
    CHECK_FALSE(ds.shots[0].valid);
    CHECK(ds.shots[0].invalid_reason == "tumbled");
  }

  TEST_CASE("cartridge parsing enforces positive weights and binary squareness") {
    const doe::DesignPlan plan = tiny_plan();
    std::vector<dio::CartridgeRecord> cartridges = make_cartridges(plan);
    testutil::TempDir dir;
    const std::string path = dir.file("c.csv");

    cartridges[0].bullet_weight = 0.0;
    dio::save_cartridges(cartridges, path);
    CHECK_THROWS_WITH_AS(dio::load_cartridges(path), doctest::Contains("must be positive"),
                         ValidationError);
    cartridges[0].bullet_weight = 55.0;
    cartridges[0].case_mouth_square = 0.5;
    dio::save_cartridges(cartridges, path);
    CHECK_THROWS_WITH_AS(dio::load_cartridges(path), doctest::Contains("0 or 1"),
                         ValidationError);
  }

  TEST_CASE("invalidation flags apply to every shot of the case") {
    const doe::DesignPlan plan = tiny_plan();
    Fixture fx(plan, make_cartridges(plan), make_shots(plan, 2));
    dio::Dataset ds = fx.load();
    const std::string case0 = plan.assignments[0].case_id;
    const std::string case1 = plan.assignments[1].case_id;
    const std::vector<dio::InvalidationFlag> flags = {{case0, "shooter_error"},
                                                      {case1, "tumbled"}};
    const dio::InvalidationReport report = dio::apply_invalidation(ds, flags);
    CHECK(report.flagged == 4);
    CHECK(report.valid_after == 12);
    CHECK(report.by_reason.at("shooter_error") == 2);
    CHECK(report.by_reason.at("tumbled") == 2);
    for (const auto& s : ds.shots) {
      if (s.case_id == case0) {
        CHECK_FALSE(s.valid);
        CHECK(s.invalid_reason == "shooter_error");
      } else if (s.case_id == case1) {
        CHECK_FALSE(s.valid);
        CHECK(s.invalid_reason == "tumbled");
      } else {
        CHECK(s.valid);
      }
    }
  }

  TEST_CASE("invalidation rejects unknown cases, duplicates, and shotless cases") {
    const doe::DesignPlan plan = tiny_plan();
    const std::vector<dio::CartridgeRecord> cartridges = make_cartridges(plan);
    std::vector<dio::ShotRecord> shots = make_shots(plan, 1);
    const std::string shotless = shots.back().case_id;
    shots.pop_back();  // that case now has no shots
    Fixture fx(plan, cartridges, shots);
    dio::Dataset ds = fx.load();
    const std::string case0 = plan.assignments[0].case_id;
    CHECK_THROWS_WITH_AS(
        dio::apply_invalidation(ds, std::vector<dio::InvalidationFlag>{{"L7-C7", "other"}}),
        doctest::Contains("unknown case"), ValidationError);
    CHECK_THROWS_WITH_AS(
        dio::apply_invalidation(ds, std::vector<dio::InvalidationFlag>{{case0, "other"},
                                                                       {case0, "tumbled"}}),
        doctest::Contains("duplicate flag"), ValidationError);
    CHECK_THROWS_WITH_AS(
        dio::apply_invalidation(ds, std::vector<dio::InvalidationFlag>{{shotless, "other"}}),
        doctest::Contains("matches no shot"), ValidationError);
  }

  TEST_CASE("flags files parse and validate reasons") {
    testutil::TempDir dir;
    const std::string path = dir.file("flags.csv");
    testutil::spit(path, "case_id,reason\nL1-C1,tumbled\nL2-C3,wrong_target\n");
    const std::vector<dio::InvalidationFlag> flags = dio::load_flags(path);
    REQUIRE(flags.size() == 2);
    CHECK(flags[0].case_id == "L1-C1");
    CHECK(flags[0].reason == "tumbled");
    testutil::spit(path, "case_id,reason\nL1-C1,oops\n");
    CHECK_THROWS_WITH_AS(dio::load_flags(path), doctest::Contains("unknown invalidation"),
                         ValidationError);
  }

  TEST_CASE("descriptive statistics match hand values") {
    const doe::DesignPlan plan = tiny_plan();
    std::vector<dio::CartridgeRecord> cartridges(4);
    for (int i = 0; i < 4; ++i) {
      cartridges[static_cast<std::size_t>(i)] =
          make_cartridge(plan, plan.assignments[static_cast<std::size_t>(i)], i);
      cartridges[static_cast<std::size_t>(i)].case_length = 1.0 + i;  // 1, 2, 3, 4
    }
    const std::vector<dio::ColumnStats> stats =
        dio::descriptive_stats(cartridges, {"case_length"});
    REQUIRE(stats.size() == 1);
    CHECK(stats[0].name == "case_length");
    CHECK(stats[0].display == "Case Length");
    CHECK(stats[0].n == 4);
    CHECK(stats[0].mean == doctest::Approx(2.5).epsilon(1e-14));
    REQUIRE(stats[0].sd.has_value());
    CHECK(*stats[0].sd == doctest::Approx(std::sqrt(5.0 / 3.0)).epsilon(1e-14));
    CHECK(stats[0].min == 1.0);
    CHECK(stats[0].max == 4.0);
    CHECK(stats[0].median == doctest::Approx(2.5).epsilon(1e-14));

    // Odd count: median is the middle value.
    const std::vector<dio::ColumnStats> odd =
        dio::descriptive_stats(std::span(cartridges.data(), 3), {"case_length"});
    CHECK(odd[0].median == 2.0);

    // Single row: standard deviation is undefined.
    const std::vector<dio::ColumnStats> one =
        dio::descriptive_stats(std::span(cartridges.data(), 1), {"case_length"});
    CHECK(one[0].n == 1);
    CHECK_FALSE(one[0].sd.has_value());
  }

  TEST_CASE("descriptive statistics cover the factor columns and reject the rest") {
    const doe::DesignPlan plan = tiny_plan();
    const std::vector<dio::CartridgeRecord> cartridges = make_cartridges(plan);
    const auto stats = dio::descriptive_stats(cartridges, {"seating_depth", "powder_charge"});
    CHECK(stats[0].min == 0.01);
    CHECK(stats[0].max == 0.02);
    CHECK(stats[1].min == 25.5);
    CHECK(stats[1].max == 25.6);
    CHECK_THROWS_WITH_AS(dio::descriptive_stats(cartridges, {"lot"}),
                         doctest::Contains("not numeric"), ValidationError);
    CHECK_THROWS_AS(dio::descriptive_stats(cartridges, {"garbage"}), ValidationError);
    CHECK_THROWS_AS(
        dio::descriptive_stats(std::span<const dio::CartridgeRecord>{}, {"case_length"}),
        ValidationError);
  }

  TEST_CASE("lot screen reports the null result for identical lots") {
    const doe::DesignPlan plan = tiny_plan();
    // Same covariate values on every cartridge; only ids and lots differ.
    std::vector<dio::CartridgeRecord> cartridges = make_cartridges(plan);
    const dio::CartridgeRecord base = make_cartridge(plan, plan.assignments[0], 0);
    for (auto& c : cartridges) {
      for (const auto& f : dio::covariate_schema_fields()) c.*(f.member) = base.*(f.member);
    }
    const std::vector<dio::LotScreenRow> rows = dio::lot_difference_screen(cartridges, 0.05);
    REQUIRE(rows.size() == 13);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      CHECK(rows[i].covariate == dio::covariate_schema_fields()[i].name);
      CHECK(rows[i].ss <= 1e-10);
      REQUIRE(rows[i].f.has_value());
      CHECK(*rows[i].f == 0.0);
      REQUIRE(rows[i].p.has_value());
      CHECK(*rows[i].p == 1.0);
      CHECK_FALSE(rows[i].significant);
    }
  }

  TEST_CASE("lot screen flags a covariate separated between lots") {
    const doe::DesignPlan plan = tiny_plan();
    std::vector<dio::CartridgeRecord> cartridges = make_cartridges(plan);
    for (std::size_t i = 0; i < cartridges.size(); ++i) {
      // Strong lot signal in case_length, tiny within-lot jitter elsewhere.
      cartridges[i].case_length =
          (cartridges[i].lot == "1" ? 1.0 : 2.0) + 0.001 * static_cast<double>(i % 4);
    }
    const std::vector<dio::LotScreenRow> rows = dio::lot_difference_screen(cartridges, 0.05);
    const auto it = std::find_if(rows.begin(), rows.end(), [](const dio::LotScreenRow& r) {
      return r.covariate == "case_length";
    });
    REQUIRE(it != rows.end());
    CHECK(it->df == 1);  // two lots
    REQUIRE(it->p.has_value());
    CHECK(*it->p < 0.001);
    CHECK(it->significant);
  }

  TEST_CASE("lot screen preconditions") {
    const doe::DesignPlan plan = tiny_plan();
    std::vector<dio::CartridgeRecord> cartridges = make_cartridges(plan);
    std::vector<dio::CartridgeRecord> one_lot;
    for (const auto& c : cartridges) {
      if (c.lot == "1") one_lot.push_back(c);
    }
    CHECK_THROWS_WITH_AS(dio::lot_difference_screen(one_lot, 0.05),
                         doctest::Contains("at least two lots"), ValidationError);
    std::vector<dio::CartridgeRecord> lopsided = one_lot;
    for (const auto& c : cartridges) {
      if (c.lot == "2") {
        lopsided.push_back(c);
        break;
      }
    }
    CHECK_THROWS_WITH_AS(dio::lot_difference_screen(lopsided, 0.05),
                         doctest::Contains("at least two cartridges"), ValidationError);
    CHECK_THROWS_AS(dio::lot_difference_screen(cartridges, 0.0), ValidationError);
    CHECK_THROWS_AS(dio::lot_difference_screen(cartridges, 1.0), ValidationError);
  }

  TEST_CASE("stability series computes the two-halves variance ratio") {
    const doe::DesignPlan plan = tiny_plan();
    std::vector<dio::ShotRecord> shots = make_shots(plan, 1);
    REQUIRE(shots.size() == 8);
    const double distances[8] = {1, 2, 3, 4, 5, 6, 7, 10};
    for (std::size_t i = 0; i < 8; ++i) {
      shots[i].x = distances[i];
      shots[i].y = 0.0;
      shots[i].seq = static_cast<long>(8 - i);  // scrambled on disk; sorted by seq on load
    }
    const dio::Dataset ds = Fixture(plan, make_cartridges(plan), shots).load();
    const dio::StabilityResult r = dio::stability_series(ds);
    REQUIRE(r.series.size() == 8);
    // Sorted by seq: distances reversed -> {10,7,6,5,4,3,2,1}.
    CHECK(r.series.front().seq == 1);
    CHECK(r.series.front().distance == doctest::Approx(10.0));
    CHECK(r.series.back().seq == 8);
    CHECK(r.series.back().distance == doctest::Approx(1.0));
    CHECK_FALSE(r.degenerate);
    // First half {10,7,6,5}: mean 7, var 14/3. Second {4,3,2,1}: var 5/3.
    CHECK(r.var_first == doctest::Approx(14.0 / 3.0).epsilon(1e-12));
    CHECK(r.var_second == doctest::Approx(5.0 / 3.0).epsilon(1e-12));
    CHECK(r.f == doctest::Approx(5.0 / 14.0).epsilon(1e-12));
    CHECK(r.df1 == 3);
    CHECK(r.df2 == 3);
    const double upper = loaddev::f_pvalue(5.0 / 14.0, 3, 3);
    CHECK(r.p == doctest::Approx(2.0 * std::min(upper, 1.0 - upper)).epsilon(1e-12));
  }

  TEST_CASE("stability series is degenerate for tiny or constant samples") {
    const doe::DesignPlan plan = tiny_plan();
    std::vector<dio::ShotRecord> shots = make_shots(plan, 1);
    shots.resize(3);
    dio::Dataset small = Fixture(plan, make_cartridges(plan), shots).load();
    CHECK(dio::stability_series(small).degenerate);

    std::vector<dio::ShotRecord> constant = make_shots(plan, 1);
    for (auto& s : constant) {
      s.x = 1.0;
      s.y = 0.0;
    }
    dio::Dataset flat = Fixture(plan, make_cartridges(plan), constant).load();
    CHECK(dio::stability_series(flat).degenerate);
  }

  TEST_CASE("stability series ignores invalidated shots") {
    const doe::DesignPlan plan = tiny_plan();
    dio::Dataset ds = Fixture(plan, make_cartridges(plan), make_shots(plan, 2)).load();
    const std::string case0 = plan.assignments[0].case_id;
    dio::apply_invalidation(ds, std::vector<dio::InvalidationFlag>{{case0, "other"}});
    const dio::StabilityResult r = dio::stability_series(ds);
    CHECK(r.series.size() == 14);
    for (const auto& p : r.series) {
      const bool from_case0 =
          std::any_of(ds.shots.begin(), ds.shots.end(), [&](const dio::ShotRecord& s) {
            return s.seq == p.seq && s.case_id == case0;
          });
      CHECK_FALSE(from_case0);
    }
  }

  TEST_CASE("leveled shots carry factor levels for valid shots only") {
    const doe::DesignPlan plan = tiny_plan();
    dio::Dataset ds = Fixture(plan, make_cartridges(plan), make_shots(plan, 2)).load();
    const std::string case0 = plan.assignments[0].case_id;
    dio::apply_invalidation(ds, std::vector<dio::InvalidationFlag>{{case0, "other"}});
    const auto shots = dio::leveled_shots(ds);
    CHECK(shots.size() == 14);
    for (const auto& s : shots) {
      CHECK((s.sd == 0.01 || s.sd == 0.02));
      CHECK((s.pc == 25.5 || s.pc == 25.6));
    }
  }

  TEST_CASE("analysis table response is the distance to the cell center") {
    const doe::DesignPlan plan = tiny_plan();
    dio::Dataset ds = Fixture(plan, make_cartridges(plan), make_shots(plan, 3)).load();
    const std::string case0 = plan.assignments[0].case_id;
    dio::apply_invalidation(ds, std::vector<dio::InvalidationFlag>{{case0, "other"}});

    const lm::DataTable table = dio::analysis_table(ds);
    CHECK(table.nrows() == 21);  // 24 shots - 3 invalidated

    // Oracle: centers per (sd, pc) cell over valid shots, pooled across lots.
    struct Key {
      double sd, pc;
      bool operator<(const Key& o) const {
        return sd < o.sd || (sd == o.sd && pc < o.pc);
      }
    };
    std::map<Key, std::pair<double, double>> sums;
    std::map<Key, int> counts;
    for (const auto& s : ds.shots) {
      if (!s.valid) continue;
      const auto& c = ds.cartridge_of(s);
      const Key k{c.seating_depth, c.powder_charge};
      sums[k].first += s.x;
      sums[k].second += s.y;
      ++counts[k];
    }
    std::vector<double> expected;
    for (const auto& s : ds.shots) {
      if (!s.valid) continue;
      const auto& c = ds.cartridge_of(s);
      const Key k{c.seating_depth, c.powder_charge};
      const double cx = sums[k].first / counts[k];
      const double cy = sums[k].second / counts[k];
      expected.push_back(std::hypot(s.x - cx, s.y - cy));
    }
    const auto& got = table.at("radial_deviation").values;
    REQUIRE(got.size() == expected.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
      CHECK(got[i] == doctest::Approx(expected[i]).epsilon(1e-12));
    }

    // Categorical columns with declared level order.
    CHECK(table.at("lot").categorical);
    CHECK(table.at("lot").levels == std::vector<std::string>{"1", "2"});
    CHECK(table.at("seating_depth").categorical);
    CHECK(table.at("seating_depth").levels == std::vector<std::string>{"0.01", "0.02"});
    CHECK(table.at("powder_charge").levels == std::vector<std::string>{"25.5", "25.6"});
    for (const auto& f : dio::covariate_schema_fields()) {
      CHECK_FALSE(table.at(f.name).categorical);
    }
  }

  TEST_CASE("analysis table requires valid shots") {
    const doe::DesignPlan plan = tiny_plan();
    std::vector<dio::ShotRecord> shots = make_shots(plan, 1);
    for (auto& s : shots) {
      s.valid = false;
      s.invalid_reason = "other";
    }
    dio::Dataset ds = Fixture(plan, make_cartridges(plan), shots).load();
    CHECK_THROWS_WITH_AS(dio::analysis_table(ds), doctest::Contains("no valid shots"),
                         ValidationError);
  }

  TEST_CASE("default model specifications are ordered as published") {
    const lm::ModelSpec anova = dio::default_anova_spec();
    REQUIRE(anova.terms.size() == 4);
    CHECK(anova.response == "radial_deviation");
    CHECK(anova.terms[0].kind == lm::TermKind::block);
    CHECK(anova.terms[0].columns == std::vector<std::string>{"lot"});
    CHECK(anova.terms[1].columns == std::vector<std::string>{"seating_depth"});
    CHECK(anova.terms[1].display == "Seating Depth");
    CHECK(anova.terms[2].columns == std::vector<std::string>{"powder_charge"});
    CHECK(anova.terms[3].kind == lm::TermKind::interaction);
    CHECK(anova.terms[3].display == "Seating Depth * Powder Charge");

    const lm::ModelSpec ancova = dio::default_ancova_spec();
    REQUIRE(ancova.terms.size() == 17);
    const std::vector<std::string> order = dio::covariate_model_order();
    for (std::size_t i = 0; i < 13; ++i) {
      CHECK(ancova.terms[4 + i].kind == lm::TermKind::covariate);
      CHECK(ancova.terms[4 + i].columns == std::vector<std::string>{order[i]});
      CHECK(ancova.terms[4 + i].display == dio::covariate_field(order[i]).display);
    }
  }

  TEST_CASE("the full pipeline recovers the designed degrees of freedom") {
    const doe::DesignPlan plan = tiny_plan();
    dio::Dataset ds = Fixture(plan, make_cartridges(plan), make_shots(plan, 3)).load();
    const lm::DataTable table = dio::analysis_table(ds);
    const lm::AnovaTable anova = lm::type1_anova(dio::default_anova_spec(), table);
    REQUIRE(anova.terms.size() == 4);
    CHECK(anova.terms[0].df == 1);  // 2 lots
    CHECK(anova.terms[1].df == 1);  // 2 depths
    CHECK(anova.terms[2].df == 1);  // 2 charges
    CHECK(anova.terms[3].df == 1);  // 1x1 interaction
    CHECK(anova.total.df == 23);
    CHECK(anova.model.df + anova.error.df == anova.total.df);
  }
}
