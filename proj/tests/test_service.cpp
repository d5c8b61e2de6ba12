#include <gtest/gtest.h>

#include <thread>

#include "httplib.h"
#include "json.hpp"
#include "xmal/annotation_hub.hpp"
#include "xmal/runner.hpp"
#include "xmal/service.hpp"

using namespace xmal;
using nlohmann::json;

namespace {

class ServiceTest : public ::testing::Test {
protected:
    void SetUp() override {
        port_ = service_.start("127.0.0.1", 0);
        ASSERT_GT(port_, 0);
    }
    void TearDown() override { service_.stop(); }

    httplib::Client client() const {
        httplib::Client c("127.0.0.1", port_);
        c.set_read_timeout(10, 0);
        return c;
    }

    std::vector<PendingQuery> post(std::vector<SampleId> ids) {
        std::vector<PendingQuery> qs;
        for (auto id : ids) {
            PendingQuery q;
            q.sample_id = id;
            q.probabilities = {0.5, 0.5};
            qs.push_back(q);
        }
        return hub_.post_queries(qs);
    }

    static httplib::Result label(httplib::Client& c, std::int64_t qid, const std::string& body) {
        return c.Post("/api/v1/queries/" + std::to_string(qid) + "/label", body, "application/json");
    }

    AnnotationHub hub_{2};
    AnnotationService service_{hub_};
    int port_ = 0;
};

}  // namespace

TEST_F(ServiceTest, EmptyQueueReturnsNoContent) {
    auto c = client();
    auto r = c.Get("/api/v1/queries/next");
    ASSERT_TRUE(r);
    EXPECT_EQ(r->status, 204);
    EXPECT_EQ(r->get_header_value("X-Queue-State"), "empty");
    EXPECT_EQ(r->get_header_value("Access-Control-Allow-Origin"), "*");
}

TEST_F(ServiceTest, NextQueryAndListing) {
    const auto posted = post({12, 40});
    auto c = client();
    auto r = c.Get("/api/v1/queries/next");
    ASSERT_TRUE(r);
    ASSERT_EQ(r->status, 200);
    const auto q = json::parse(r->body);
    EXPECT_EQ(q.at("query_id"), posted[0].query_id);
    EXPECT_EQ(q.at("sample_id"), 12);
    EXPECT_EQ(q.at("probabilities").size(), 2u);
    EXPECT_FALSE(q.contains("label"));
    EXPECT_FALSE(q.contains("true_label"));

    auto all = c.Get("/api/v1/queries");
    ASSERT_TRUE(all);
    const auto body = json::parse(all->body);
    EXPECT_EQ(body.at("num_classes"), 2);
    EXPECT_EQ(body.at("queries").size(), 2u);
}

TEST_F(ServiceTest, LabelSubmissionStatusCodes) {
    const auto posted = post({3});
    auto c = client();
    const auto qid = posted[0].query_id;

    auto r = label(c, qid, R"({"label": 1})");
    ASSERT_TRUE(r);
    EXPECT_EQ(r->status, 200);
    EXPECT_EQ(json::parse(r->body).at("status"), "accepted");

    r = label(c, qid, R"({"label": 1})");
    EXPECT_EQ(r->status, 200);
    EXPECT_EQ(json::parse(r->body).at("status"), "duplicate");

    r = label(c, qid, R"({"label": 0})");
    EXPECT_EQ(r->status, 409);
    EXPECT_EQ(json::parse(r->body).at("recorded_label"), 1);

    EXPECT_EQ(label(c, 424242, R"({"label": 0})")->status, 404);
    EXPECT_EQ(hub_.recorded_label(qid), 1);
    ASSERT_EQ(hub_.audit_log().size(), 1u);

    auto audit = c.Get("/api/v1/audit");
    ASSERT_TRUE(audit);
    EXPECT_EQ(json::parse(audit->body).at("rows").size(), 1u);
}

TEST_F(ServiceTest, InvalidBodiesAreRejected) {
    const auto posted = post({3});
    auto c = client();
    const auto qid = posted[0].query_id;
    EXPECT_EQ(label(c, qid, R"({"label": 2})")->status, 400);
    EXPECT_EQ(label(c, qid, R"({"label": -1})")->status, 400);
    EXPECT_EQ(label(c, qid, R"({"label": "1"})")->status, 400);
    EXPECT_EQ(label(c, qid, R"({"lab": 1})")->status, 400);
    EXPECT_EQ(label(c, qid, "not json")->status, 400);
    EXPECT_FALSE(hub_.recorded_label(qid).has_value());
}

TEST_F(ServiceTest, StatusAndMetricsArePublishedSnapshots) {
    hub_.publish_status(R"({"iteration": 3})");
    hub_.publish_metrics(R"({"iterations": []})");
    auto c = client();
    EXPECT_EQ(json::parse(c.Get("/api/v1/status")->body).at("iteration"), 3);
    EXPECT_TRUE(json::parse(c.Get("/api/v1/metrics")->body).contains("iterations"));
    auto pre = c.Options("/api/v1/queries");
    ASSERT_TRUE(pre);
    EXPECT_EQ(pre->status, 204);
    EXPECT_EQ(pre->get_header_value("Access-Control-Allow-Methods"), "GET, POST, OPTIONS");
}

TEST_F(ServiceTest, ScriptedAnnotatorDrivesExperiment) {
    ExperimentConfig cfg;
    cfg.synth.n_samples = 200;
    cfg.synth.eeg_dim = cfg.synth.face_dim = 6;
    cfg.hidden = {8};
    cfg.embedding_dim = 4;
    cfg.epochs = 1;
    cfg.batch_size = 8;
    cfg.budget_percent = 30.0;
    cfg.oracle.kind = OracleKind::Remote;
    cfg.oracle.timeout_seconds = 30.0;
    const auto data = load_dataset(cfg);
    Experiment ex(cfg, data);
    ex.attach_hub(&hub_);
    const auto labeled_before = ex.pool().labeled().size();

    std::atomic<bool> done{false};
    std::size_t answered = 0;
    std::thread annotator([&] {
        auto c = client();
        while (!done) {
            auto r = c.Get("/api/v1/queries/next");
            if (r && r->status == 200) {
                const auto q = json::parse(r->body);
                const int truth = *data.at(q.at("sample_id").get<SampleId>()).label;
                auto s = label(c, q.at("query_id").get<std::int64_t>(), json{{"label", truth}}.dump());
                if (s && s->status == 200) ++answered;
            } else {
                std::this_thread::sleep_for(std::chrono::milliseconds(2));
            }
        }
    });
    const auto status = ex.step();
    done = true;
    annotator.join();

    EXPECT_EQ(status, RunStatus::Running);
    EXPECT_EQ(answered, 10u);
    EXPECT_EQ(ex.pool().labeled().size(), labeled_before + 10);
    for (auto id : ex.pool().history()[0]) EXPECT_EQ(ex.pool().labeled().at(id), *data.at(id).label);
    const auto status_doc = json::parse(hub_.status_json());
    EXPECT_EQ(status_doc.at("iteration"), 1);
}

TEST_F(ServiceTest, UnansweredQueriesPauseTheRun) {
    ExperimentConfig cfg;
    cfg.synth.n_samples = 200;
    cfg.hidden = {8};
    cfg.embedding_dim = 4;
    cfg.epochs = 1;
    cfg.batch_size = 8;
    cfg.oracle.kind = OracleKind::Remote;
    cfg.oracle.timeout_seconds = 0.05;
    Experiment ex(cfg, load_dataset(cfg));
    ex.attach_hub(&hub_);
    EXPECT_EQ(ex.step(), RunStatus::Paused);
    EXPECT_EQ(ex.pool().history().size(), 0u);
    EXPECT_EQ(hub_.pending().size(), 10u);
    const auto first = hub_.pending();
    for (std::size_t i = 0; i + 1 < first.size(); ++i) hub_.submit_label(first[i].query_id, 0);
    EXPECT_EQ(ex.step(), RunStatus::Paused);
    ASSERT_EQ(ex.pool().history().size(), 1u);
    EXPECT_EQ(ex.pool().history()[0].size(), 9u);
    EXPECT_EQ(ex.log().iterations.size(), 1u);

    hub_.submit_label(first.back().query_id, 1);
    EXPECT_EQ(ex.step(), RunStatus::Paused);
    ASSERT_GE(ex.pool().history().size(), 2u);
    EXPECT_EQ(ex.pool().history()[1], std::vector<SampleId>{first.back().sample_id});
    EXPECT_EQ(ex.log().iterations.size(), 2u);
}

TEST(ServiceBind, BusyPortIsReported) {
    AnnotationHub hub(2);
    AnnotationService a(hub), b(hub);
    const int port = a.start("127.0.0.1", 0);
    EXPECT_THROW(b.start("127.0.0.1", port), std::runtime_error);
    a.stop();
}
