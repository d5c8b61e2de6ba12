#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "xmal/data.hpp"
#include "xmal/error.hpp"

using namespace xmal;

namespace {

double nearest_mean_accuracy(const Dataset& ds) {
    std::vector<std::vector<double>> mean(ds.num_classes, std::vector<double>(ds.eeg_dim, 0.0));
    std::vector<double> count(ds.num_classes, 0.0);
    for (const auto& r : ds.records) {
        const auto c = static_cast<std::size_t>(*r.label);
        for (std::size_t k = 0; k < ds.eeg_dim; ++k) mean[c][k] += r.eeg[k];
        count[c] += 1.0;
    }
    for (std::size_t c = 0; c < ds.num_classes; ++c)
        for (auto& x : mean[c]) x /= count[c];
    std::size_t correct = 0;
    for (const auto& r : ds.records) {
        std::size_t best = 0;
        double best_d = INFINITY;
        for (std::size_t c = 0; c < ds.num_classes; ++c) {
            double d = 0.0;
            for (std::size_t k = 0; k < ds.eeg_dim; ++k) d += (r.eeg[k] - mean[c][k]) * (r.eeg[k] - mean[c][k]);
            if (d < best_d) best_d = d, best = c;
        }
        correct += static_cast<int>(best) == *r.label;
    }
    return static_cast<double>(correct) / static_cast<double>(ds.size());
}

}  // namespace

TEST(Generate, NoiselessEegIsSeparable) {
    SynthConfig cfg;
    cfg.n_samples = 400;
    cfg.num_classes = 3;
    cfg.eeg_noise = 0.0;
    EXPECT_EQ(nearest_mean_accuracy(generate(cfg)), 1.0);
}

TEST(Generate, ShapesAndLabels) {
    SynthConfig cfg;
    cfg.n_samples = 50;
    cfg.eeg_dim = 7;
    cfg.face_dim = 5;
    cfg.num_classes = 4;
    const auto ds = generate(cfg);
    EXPECT_NO_THROW(ds.validate());
    ASSERT_EQ(ds.size(), 50u);
    for (const auto& r : ds.records) {
        EXPECT_EQ(r.eeg.size(), 7u);
        EXPECT_EQ(r.face.size(), 5u);
        ASSERT_TRUE(r.label.has_value());
        EXPECT_LT(*r.label, 4);
    }
}

TEST(Generate, ByteIdenticalForSameSeed) {
    SynthConfig cfg;
    cfg.n_samples = 300;
    std::ostringstream a, b, c;
    write_features(a, generate(cfg));
    write_features(b, generate(cfg));
    cfg.seed = 2;
    write_features(c, generate(cfg));
    EXPECT_EQ(a.str(), b.str());
    EXPECT_NE(a.str(), c.str());
}

TEST(Generate, ClassBalanceWithinThreeSigma) {
    SynthConfig cfg;
    cfg.num_classes = 3;
    const auto ds = generate(cfg);
    std::vector<double> count(3, 0.0);
    for (const auto& r : ds.records) count[static_cast<std::size_t>(*r.label)] += 1.0;
    const double n = 2000.0, p = 1.0 / 3.0;
    for (double c : count) EXPECT_NEAR(c, n * p, 3.0 * std::sqrt(n * p * (1 - p)));
}

TEST(Generate, RealizedInconsistencyRate) {
    for (double rho : {0.0, 0.1, 0.3}) {
        SynthConfig cfg;
        cfg.inconsistency_rate = rho;
        SynthTrace trace;
        generate(cfg, &trace);
        double mismatched = 0.0;
        for (std::size_t i = 0; i < trace.latent_class.size(); ++i)
            mismatched += trace.latent_class[i] != trace.face_class[i];
        const double n = 2000.0;
        EXPECT_NEAR(mismatched / n, rho, 3.0 * std::sqrt(rho * (1 - rho) / n) + 1e-12) << rho;
    }
}

TEST(Generate, FullInconsistencyAlwaysSubstitutesAnotherClass) {
    SynthConfig cfg;
    cfg.inconsistency_rate = 1.0;
    cfg.num_classes = 3;
    SynthTrace trace;
    generate(cfg, &trace);
    for (std::size_t i = 0; i < trace.latent_class.size(); ++i) ASSERT_NE(trace.latent_class[i], trace.face_class[i]);
}

TEST(Generate, StoredLabelNoise) {
    SynthConfig cfg;
    cfg.label_noise = 0.2;
    SynthTrace trace;
    const auto ds = generate(cfg, &trace);
    double flipped = 0.0;
    for (std::size_t i = 0; i < ds.size(); ++i) flipped += *ds.records[i].label != trace.latent_class[i];
    EXPECT_NEAR(flipped / 2000.0, 0.2, 3.0 * std::sqrt(0.16 / 2000.0));
}

TEST(Generate, RejectsInvalidConfig) {
    SynthConfig cfg;
    cfg.num_classes = 1;
    EXPECT_THROW(generate(cfg), ConfigError);
    cfg = {};
    cfg.inconsistency_rate = 1.5;
    EXPECT_THROW(generate(cfg), ConfigError);
    cfg = {};
    cfg.n_samples = 0;
    EXPECT_THROW(generate(cfg), ConfigError);
}

TEST(Split, DefaultProportions) {
    SynthConfig cfg;
    cfg.n_samples = 1000;
    const auto ds = generate(cfg);
    const auto pool = split(ds, SplitFractions{}, 5);
    EXPECT_EQ(pool.labeled().size(), 100u);
    EXPECT_EQ(pool.unlabeled().size(), 700u);
    EXPECT_EQ(pool.test().size(), 200u);
    for (const auto& [id, label] : pool.labeled()) EXPECT_EQ(label, *ds.at(id).label);
}

TEST(Split, SeedControlsAssignment) {
    SynthConfig cfg;
    cfg.n_samples = 200;
    const auto ds = generate(cfg);
    EXPECT_EQ(split(ds, SplitFractions{}, 1), split(ds, SplitFractions{}, 1));
    EXPECT_NE(split(ds, SplitFractions{}, 1).test(), split(ds, SplitFractions{}, 2).test());
}

TEST(Split, RejectsEmptyParts) {
    SynthConfig cfg;
    cfg.n_samples = 100;
    const auto ds = generate(cfg);
    EXPECT_THROW(split(ds, SplitFractions{1.0, 0.0, 0.0}, 1), ConfigError);
    EXPECT_THROW(split(ds, SplitFractions{0.5, 0.5, 0.0}, 1), ConfigError);
    EXPECT_THROW(split(ds, SplitFractions{0.5, 0.6, 0.2}, 1), ConfigError);
}

TEST(Split, TagsRoundTripThroughPool) {
    SynthConfig cfg;
    cfg.n_samples = 100;
    const auto ds = generate(cfg);
    const auto pool = split(ds, SplitFractions{}, 3);
    EXPECT_EQ(pool_from_tags(with_split_tags(ds, pool)), pool);
}

TEST(FeatureFile, WriteReadRoundTripIsExact) {
    SynthConfig cfg;
    cfg.n_samples = 120;
    cfg.num_classes = 3;
    auto ds = with_split_tags(generate(cfg), split(generate(cfg), SplitFractions{}, 4));
    ds.records[3].subject = 12;
    ds.records[5].label.reset();
    ds.records[5].split = Split::Unlabeled;
    std::stringstream ss;
    write_features(ss, ds);
    EXPECT_EQ(read_features(ss, IngestSchema{3, std::nullopt}), ds);
}

TEST(FeatureFile, MissingFaceColumnsRejected) {
    std::istringstream in("id,split,label,eeg_0,eeg_1\n0,labeled,0,0.1,0.2\n1,test,1,0.3,0.4\n");
    EXPECT_THROW(read_features(in, IngestSchema{}), DataError);
}

TEST(FeatureFile, MalformedRowsRejected) {
    std::istringstream short_row("id,split,label,eeg_0,face_0\n0,labeled,0,0.1\n");
    EXPECT_THROW(read_features(short_row, IngestSchema{}), DataError);
    std::istringstream bad_label("id,split,label,eeg_0,face_0\n0,labeled,5,0.1,0.2\n");
    EXPECT_THROW(read_features(bad_label, IngestSchema{}), DataError);
    std::istringstream bad_number("id,split,label,eeg_0,face_0\n0,labeled,0,abc,0.2\n");
    EXPECT_THROW(read_features(bad_number, IngestSchema{}), DataError);
    std::istringstream bad_split("id,split,label,eeg_0,face_0\n0,train,0,0.1,0.2\n");
    EXPECT_THROW(read_features(bad_split, IngestSchema{}), DataError);
    std::istringstream gap("id,split,label,eeg_0,face_0\n0,labeled,0,0.1,0.2\n2,test,1,0.1,0.2\n");
    EXPECT_THROW(read_features(gap, IngestSchema{}), DataError);
}

TEST(FeatureFile, ValenceScoresAreBinarized) {
    std::istringstream in(
        "id,split,label,subject,eeg_0,face_0\n"
        "0,labeled,1,1,0.1,0.2\n"
        "1,labeled,4.9,1,0.1,0.2\n"
        "2,unlabeled,5,2,0.1,0.2\n"
        "3,unlabeled,9,2,0.1,0.2\n"
        "4,test,7.5,3,0.1,0.2\n"
        "5,test,2,3,0.1,0.2\n");
    const auto ds = read_features(in, IngestSchema{2, 5.0});
    const std::vector<int> want{0, 0, 1, 1, 1, 0};
    for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(*ds.records[i].label, want[i]) << i;
    EXPECT_EQ(ds.records[4].subject, 3);
    std::istringstream out_of_range("id,split,label,eeg_0,face_0\n0,labeled,9.5,0.1,0.2\n");
    EXPECT_THROW(read_features(out_of_range, IngestSchema{2, 5.0}), DataError);
}
