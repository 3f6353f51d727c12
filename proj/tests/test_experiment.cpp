#include <gtest/gtest.h>

#include <filesystem>

#include "amore/error.hpp"
#include "amore/experiment.hpp"
#include "amore/massmap.hpp"

using namespace amore;
namespace fs = std::filesystem;

namespace {

exp::ExperimentConfig tiny() {
    exp::ExperimentConfig c;
    c.grid = "3x3";
    c.steps = 20;
    c.dt = 1e-2;
    c.segment_length = 11;
    c.p = 3;
    c.branch.width = 8;
    c.branch.layers = 2;
    c.trunk.hidden = {6};
    c.epochs = 20;
    c.eval_every = 10;
    c.minibatches = 2;
    c.update_first_epoch = 5;
    c.update_every = 5;
    return c;
}

}  // namespace

TEST(ExperimentConfig, JsonRoundTripResolvesDefaults) {
    auto c = exp::ExperimentConfig::from_json(io::Json::object());
    EXPECT_TRUE(c.pou_enabled());
    EXPECT_DOUBLE_EQ(c.bound_value(), 1.05);
    auto j = c.to_json();
    EXPECT_EQ(j.at("pou"), true);
    EXPECT_EQ(exp::ExperimentConfig::from_json(j).to_json(), j);

    auto two = exp::ExperimentConfig::from_json({{"paradigm", "two-step"}, {"loss", "ad-a"}});
    EXPECT_FALSE(two.pou_enabled());
    EXPECT_EQ(two.bound_value(), 0.0);
    EXPECT_EQ(two.to_json().at("loss"), "ad-a");
    EXPECT_EQ(exp::ExperimentConfig::from_json(two.to_json()).to_json(), two.to_json());
}

TEST(ExperimentConfig, RejectsForbiddenCombinations) {
    using J = io::Json;
    for (const J& bad : {J{{"paradigm", "two-step"}, {"pou", true}}, J{{"paradigm", "two-step"}, {"com", true}},
                         J{{"paradigm", "two-step"}, {"bound", 1.05}}, J{{"paradigm", "three-step"}},
                         J{{"loss", "ad-c"}}, J{{"grid", "3x"}}, J{{"mechanism", "h2"}}, J{{"epochs", 0}},
                         J{{"segment_length", 8}}, J{{"branch", {{"layers", 3}}}},
                         J{{"trunk", {{"family", "mlp"}}}}, J{{"learning_rate", 1e-3}},
                         J{{"branch", {{"depth", 2}}}}, J{{"p", "sixteen"}}})
        EXPECT_THROW(exp::ExperimentConfig::from_json(bad), ConfigError) << bad.dump();
}

TEST(ExperimentConfig, MassMapNeedsAGroup) {
    TrajectoryDataset ds;
    ds.schema.names = {"x", "y"};
    ds.schema.log_transform = {false, false};
    ds.raw = Tensor({1, 2, 2}, 0.5);
    ds.train = {0};
    EXPECT_THROW(exp::model_view(ds, true), ConfigError);
    EXPECT_NO_THROW(exp::model_view(ds, false));
}

TEST(SchemaDiff, ListsEachDifference) {
    kin::Rober r;
    kin::ToyCombustion t;
    EXPECT_EQ(exp::schema_diff(r.schema(), r.schema()), "");
    const auto d = exp::schema_diff(r.schema(), t.schema());
    EXPECT_NE(d.find("names"), std::string::npos) << d;
    EXPECT_NE(d.find("temperature_index"), std::string::npos) << d;
}

TEST(TrainRun, OneStepWritesArtifactsAndMatchesEvaluation) {
    auto cfg = tiny();
    kin::Rober mech;
    auto ds = generate_dataset(mech, cfg.generation());
    const auto dir = fs::temp_directory_path() / "amore_run_one";
    fs::remove_all(dir);
    auto out = exp::train_run(cfg, ds, cfg.run_seed(0), dir);
    for (const char* f : {"history.csv", "weights.csv", "checkpoint/manifest.json", "checkpoint/surrogate.json"})
        EXPECT_TRUE(fs::exists(dir / f)) << f;
    ASSERT_TRUE(out.test.has_value());
    EXPECT_NEAR(out.test->segmented.global_mean, out.result.history.back().test_rel_l2, 1e-12);
    auto back = exp::load_surrogate(dir / "checkpoint");
    auto train = exp::evaluate_split(back, ds, ds.train, cfg.segment_length);
    EXPECT_NEAR(train.segmented.global_mean, out.final_train_rel_l2, 1e-12);
    fs::remove_all(dir);
}

TEST(TrainRun, TwoStepWritesBothHistories) {
    auto cfg = tiny();
    cfg.paradigm = Paradigm::TwoStep;
    cfg.loss = loss::Kind::TypeA;
    kin::Rober mech;
    auto ds = generate_dataset(mech, cfg.generation());
    const auto dir = fs::temp_directory_path() / "amore_run_two";
    fs::remove_all(dir);
    auto out = exp::train_run(cfg, ds, 4, dir);
    EXPECT_TRUE(fs::exists(dir / "history_trunk.csv"));
    EXPECT_TRUE(fs::exists(dir / "history_branch.csv"));
    EXPECT_EQ(out.trunk_result.history.size(), 2u);
    auto back = exp::load_surrogate(dir / "checkpoint");
    EXPECT_EQ(back.model.paradigm, Paradigm::TwoStep);
    fs::remove_all(dir);
}

TEST(TrainRun, MassMappedPredictionsConserveMass) {
    auto cfg = tiny();
    cfg.mass_map = true;
    kin::Rober mech;
    auto ds = generate_dataset(mech, cfg.generation());
    auto out = exp::train_run(cfg, ds, 2);
    EXPECT_EQ(out.surrogate.model.num_states(), 2u);
    Tensor y0({ds.test.size(), 3});
    for (std::size_t b = 0; b < ds.test.size(); ++b)
        for (std::size_t a = 0; a < 3; ++a) y0.at(b, a) = ds.raw.at(ds.test[b], 0, a);
    Tensor pred = out.surrogate.predict(y0);
    ASSERT_EQ(pred.dim(2), 3u);
    for (std::size_t r = 0; r < pred.size() / 3; ++r)
        EXPECT_NEAR(pred[3 * r] + pred[3 * r + 1] + pred[3 * r + 2], 1.0, 1e-12);
    Tensor roll = out.surrogate.rollout(y0, 2);
    for (std::size_t r = 0; r < roll.size() / 3; ++r)
        EXPECT_NEAR(roll[3 * r] + roll[3 * r + 1] + roll[3 * r + 2], 1.0, 1e-12);
    auto curves = exp::evaluate_rollout(out.surrogate, ds, ds.test, 2);
    EXPECT_EQ(curves.num_segments(), 2u);
    EXPECT_THROW(exp::evaluate_rollout(out.surrogate, ds, ds.test, 3), ConfigError);
}

TEST(TrainRun, SchemaMismatchIsReported) {
    auto cfg = tiny();
    kin::Rober mech;
    auto ds = generate_dataset(mech, cfg.generation());
    cfg.epochs = 1;
    auto out = exp::train_run(cfg, ds, 1);
    ds.schema.names[1] = "B";
    try {
        exp::evaluate_split(out.surrogate, ds, ds.test, cfg.segment_length);
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("names"), std::string::npos) << e.what();
    }
}
