#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "xmal/error.hpp"
#include "xmal/runner.hpp"

using namespace xmal;

namespace {

ExperimentConfig small_config(std::uint64_t seed = 1) {
    ExperimentConfig c;
    c.set("seed", std::to_string(seed));
    c.synth.n_samples = 300;
    c.synth.eeg_dim = 8;
    c.synth.face_dim = 6;
    c.hidden = {12};
    c.embedding_dim = 6;
    c.epochs = 4;
    c.batch_size = 16;
    c.optimizer.lr = 5e-3;
    c.ratio_percent = 10.0;
    c.budget_percent = 50.0;
    c.oracle.noise_rate = 0.1;
    return c;
}

MetricsLog run_all(const ExperimentConfig& c) {
    Experiment ex(c, load_dataset(c));
    ex.run();
    return ex.log();
}

}  // namespace

TEST(TrainIteration, TaskOnlyFitsSeparableData) {
    SynthConfig s;
    s.n_samples = 200;
    s.eeg_noise = 0.1;
    const auto data = generate(s);
    ModelConfig mc;
    mc.eeg_dim = data.eeg_dim;
    mc.face_dim = data.face_dim;
    auto params = ModelParams::initialize(mc, 3);
    auto adam = AdamState::for_params(params.tensors(), AdamHyper{});
    TrainSettings ts;
    ts.objective.weights = {0.0, 0.0, 1.0};
    ts.epochs = 50;
    std::mt19937_64 rng(1);
    train_iteration(params, adam, data, data.labels(), ts, rng);
    std::set<SampleId> all;
    for (const auto& r : data.records) all.insert(r.id);
    EXPECT_GE(evaluate_accuracy(params, data, all), 0.99);
}

TEST(TrainIteration, ZeroEpochsLeavesParametersUntouched) {
    const auto data = generate(SynthConfig{});
    ModelConfig mc;
    mc.eeg_dim = data.eeg_dim;
    mc.face_dim = data.face_dim;
    const auto before = ModelParams::initialize(mc, 3);
    auto params = before;
    auto adam = AdamState::for_params(params.tensors(), AdamHyper{});
    TrainSettings ts;
    ts.epochs = 0;
    std::mt19937_64 rng(1);
    const auto summary = train_iteration(params, adam, data, data.labels(), ts, rng);
    EXPECT_EQ(params, before);
    EXPECT_EQ(summary.steps, 0u);
    EXPECT_EQ(adam.step, 0u);
}

TEST(TrainIteration, RejectsPoolSmallerThanBatch) {
    const auto data = generate(SynthConfig{});
    ModelConfig mc;
    mc.eeg_dim = data.eeg_dim;
    mc.face_dim = data.face_dim;
    auto params = ModelParams::initialize(mc, 3);
    auto adam = AdamState::for_params(params.tensors(), AdamHyper{});
    std::mt19937_64 rng(1);
    EXPECT_THROW(train_iteration(params, adam, data, {{0, 1}, {1, 0}}, TrainSettings{}, rng), ConfigError);
}

TEST(TrainIteration, LossDecreasesAcrossSeeds) {
    int decreased = 0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        auto c = small_config(seed);
        c.budget_percent = 10.0;
        c.epochs = 10;
        const auto log = run_all(c);
        ASSERT_EQ(log.iterations.size(), 1u);
        decreased += log.iterations[0].last_epoch_loss < log.iterations[0].first_epoch_loss;
    }
    EXPECT_GE(decreased, 9);
}

TEST(Experiment, BudgetEqualToInitialPoolRunsOnce) {
    auto c = small_config();
    c.budget_percent = 10.0;
    const auto log = run_all(c);
    ASSERT_EQ(log.iterations.size(), 1u);
    EXPECT_EQ(log.iterations[0].acquired, 0u);
    EXPECT_EQ(log.iterations[0].labeled, 30u);
}

TEST(Experiment, PoolGrowsByFixedCountUntilBudget) {
    auto c = small_config();
    Experiment ex(c, load_dataset(c));
    const std::size_t trainable = ex.pool().labeled().size() + ex.pool().unlabeled().size();
    const auto test = ex.pool().test();
    EXPECT_EQ(ex.target_labeled(), 150u);
    ex.run();
    const auto& it = ex.log().iterations;
    ASSERT_FALSE(it.empty());
    for (std::size_t i = 0; i < it.size(); ++i) {
        EXPECT_EQ(it[i].labeled + it[i].unlabeled, trainable);
        if (i + 1 < it.size()) {
            EXPECT_EQ(it[i].acquired, 30u);
            EXPECT_EQ(it[i + 1].labeled, it[i].labeled + it[i].acquired);
        }
        EXPECT_EQ(it[i].histogram_post.total(), it[i].unlabeled);
    }
    EXPECT_EQ(it.back().labeled, 150u);
    EXPECT_EQ(ex.pool().test(), test);
    for (const auto& batch : ex.pool().history())
        for (auto id : batch) EXPECT_FALSE(test.contains(id));
}

TEST(Experiment, FullBudgetExhaustsUnlabeledPool) {
    auto c = small_config();
    c.budget_percent = 100.0;
    c.ratio_percent = 25.0;
    c.epochs = 1;
    Experiment ex(c, load_dataset(c));
    ex.run();
    EXPECT_TRUE(ex.pool().unlabeled().empty());
    EXPECT_EQ(ex.log().iterations.back().unlabeled, 0u);
    EXPECT_FALSE(ex.log().iterations.back().top5_mean_post.has_value());
}

TEST(Experiment, RatioCountModeShrinksBatches) {
    auto c = small_config();
    c.count_mode = CountMode::Ratio;
    c.ratio_percent = 20.0;
    c.epochs = 1;
    const auto log = run_all(c);
    ASSERT_GE(log.iterations.size(), 2u);
    EXPECT_EQ(log.iterations[0].acquired, acquisition_count(log.iterations[0].unlabeled, 0.2));
    EXPECT_LT(log.iterations[1].acquired, log.iterations[0].acquired);
}

TEST(Experiment, NoAcquisitionTopsUpAtRandomAndTrainsOnce) {
    auto c = small_config();
    c.mode = AcquisitionMode::None;
    Experiment ex(c, load_dataset(c));
    EXPECT_EQ(ex.run(), RunStatus::Finished);
    ASSERT_EQ(ex.log().iterations.size(), 1u);
    EXPECT_EQ(ex.log().iterations[0].labeled, 150u);
    EXPECT_EQ(ex.log().method, "none");
}

TEST(Experiment, RandomAndEntropyDiffer) {
    auto e = small_config();
    auto r = small_config();
    r.mode = AcquisitionMode::Random;
    e.epochs = r.epochs = 1;
    Experiment a(e, load_dataset(e)), b(r, load_dataset(r));
    a.step();
    b.step();
    EXPECT_NE(a.pool().history().at(0), b.pool().history().at(0));
    EXPECT_EQ(a.pool().history()[0].size(), b.pool().history()[0].size());
}

TEST(Experiment, EntropyPicksHighestUncertainty) {
    auto c = small_config();
    c.epochs = 2;
    const auto data = load_dataset(c);
    Experiment ex(c, data);
    ex.step();
    // Re-score the pre-acquisition unlabeled set with the trained model.
    std::set<SampleId> before = ex.pool().unlabeled();
    for (auto id : ex.pool().history()[0]) before.insert(id);
    const auto scores = entropy_scores(ex.params(), data, before);
    const auto expected = select_top(scores, 30).ids();
    EXPECT_EQ(ex.pool().history()[0], expected);
}

TEST(Experiment, DeterministicForFixedSeeds) {
    const auto c = small_config(4);
    const auto a = run_all(c);
    const auto b = run_all(c);
    EXPECT_TRUE(a.same_outcome(b));
    EXPECT_FALSE(a.same_outcome(run_all(small_config(5))));
}

TEST(Experiment, ResumeIsBitIdentical) {
    const auto c = small_config(6);
    const auto data = load_dataset(c);
    Experiment straight(c, data);
    straight.run();

    for (std::size_t cut = 1; cut < straight.log().iterations.size(); ++cut) {
        Experiment first(c, data);
        first.run(cut);
        auto resumed = Experiment::resume(first.state_json(), data, &c);
        EXPECT_EQ(resumed.next_iteration(), cut);
        resumed.run();
        EXPECT_TRUE(resumed.log().same_outcome(straight.log())) << "cut " << cut;
        EXPECT_EQ(resumed.params(), straight.params()) << "cut " << cut;
        EXPECT_EQ(resumed.pool(), straight.pool()) << "cut " << cut;
    }
}

TEST(Experiment, ResumeRefusesMismatchedConfigOrData) {
    const auto c = small_config();
    const auto data = load_dataset(c);
    Experiment ex(c, data);
    ex.run(1);
    const auto state = ex.state_json();
    auto other = c;
    other.epochs += 1;
    EXPECT_THROW(Experiment::resume(state, data, &other), ConfigError);
    auto moved = c;
    moved.output_dir = "/tmp/other";
    EXPECT_NO_THROW(Experiment::resume(state, data, &moved));
    auto tampered = data;
    tampered.records[0].eeg[0] += 1.0;
    EXPECT_THROW(Experiment::resume(state, tampered, &c), DataError);
    EXPECT_THROW(Experiment::resume("{\"format\":\"other\"}", data), DataError);
    EXPECT_THROW(Experiment::resume("not json", data), DataError);
}

TEST(Experiment, EvaluationDoesNotTouchState) {
    const auto c = small_config();
    Experiment ex(c, load_dataset(c));
    ex.run(1);
    const auto params = ex.params();
    const double a = evaluate_accuracy(ex.params(), ex.data(), ex.pool().test());
    const double b = evaluate_accuracy(ex.params(), ex.data(), ex.pool().test());
    EXPECT_EQ(a, b);
    EXPECT_EQ(ex.params(), params);
    EXPECT_EQ(a, ex.log().iterations[0].test_accuracy);
}

TEST(Experiment, WarmStartAndReinitialization) {
    auto warm = small_config();
    auto cold = small_config();
    cold.warm_start = false;
    const auto a = run_all(warm);
    const auto b = run_all(cold);
    ASSERT_GE(a.iterations.size(), 2u);
    EXPECT_TRUE(a.iterations[0].warm_start);
    EXPECT_FALSE(b.iterations[0].warm_start);
    EXPECT_EQ(a.iterations[0].test_accuracy, b.iterations[0].test_accuracy);
    EXPECT_EQ(a.iterations[0].histogram_post, b.iterations[0].histogram_post);
    EXPECT_NE(a.iterations[1].loss_total, b.iterations[1].loss_total);
    EXPECT_GT(b.iterations[1].first_epoch_loss, a.iterations[1].first_epoch_loss);
}

TEST(Experiment, RejectsClassCountMismatch) {
    auto c = small_config();
    auto data = load_dataset(c);
    c.synth.num_classes = 3;
    EXPECT_THROW(Experiment(c, data), ConfigError);
}

TEST(Metrics, HistogramBinsAndFractions) {
    const double ln2 = std::log(2.0);
    const std::vector<double> e{0.0, ln2 * 0.06, ln2 * 0.24, ln2 * 0.26, ln2, ln2 * 0.999};
    const auto h = UncertaintyHistogram::of(e, 2);
    EXPECT_EQ(h.total(), 6u);
    EXPECT_EQ(h.counts[0], 1u);
    EXPECT_EQ(h.counts[1], 1u);
    EXPECT_EQ(h.counts[4], 1u);
    EXPECT_EQ(h.counts[5], 1u);
    EXPECT_EQ(h.counts[19], 2u);
    EXPECT_DOUBLE_EQ(h.fraction_below(5), 0.5);
    EXPECT_EQ(UncertaintyHistogram{}.fraction_below(5), 0.0);
}

TEST(Metrics, TopFractionMean) {
    std::vector<double> v(100);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>(i);
    EXPECT_DOUBLE_EQ(*top_fraction_mean(v, 0.05), 97.0);
    const std::vector<double> three{1.0, 5.0, 2.0};
    EXPECT_DOUBLE_EQ(*top_fraction_mean(three, 0.05), 5.0);
    EXPECT_FALSE(top_fraction_mean(std::vector<double>{}).has_value());
}

TEST(Metrics, JsonRoundTrip) {
    const auto log = run_all(small_config());
    const auto back = MetricsLog::from_json(log.to_json());
    EXPECT_TRUE(back.same_outcome(log));
    EXPECT_THROW(MetricsLog::from_json("[]"), DataError);
}

TEST(Metrics, WallClockExcludedFromOutcome) {
    auto log = run_all(small_config());
    auto other = log;
    other.iterations[0].wall_clock_seconds += 10.0;
    EXPECT_TRUE(other.same_outcome(log));
    other.iterations[0].test_accuracy += 1e-12;
    EXPECT_FALSE(other.same_outcome(log));
}
