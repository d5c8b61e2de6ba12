#include "xmal/service.hpp"

#include <stdexcept>

#include "httplib.h"
#include "json.hpp"

namespace xmal {

using nlohmann::json;

namespace {

json summary_json(const FeatureSummary& s) {
    return {{"min", s.min}, {"mean", s.mean}, {"max", s.max}, {"profile", s.profile}};
}

json query_object(const PendingQuery& q) {
    return {{"query_id", q.query_id},   {"sample_id", q.sample_id},
            {"probabilities", q.probabilities}, {"uncertainty", q.uncertainty},
            {"eeg", summary_json(q.eeg)}, {"face", summary_json(q.face)},
            {"created_at_ms", q.created_at_ms}};
}

void send_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& message) {
    send_json(res, status, {{"error", message}});
}

}  // namespace

std::string query_json(const PendingQuery& q) { return query_object(q).dump(); }

AnnotationService::AnnotationService(AnnotationHub& hub, std::string cors_origin)
    : hub_(&hub), cors_origin_(std::move(cors_origin)), server_(std::make_unique<httplib::Server>()) {
    install_routes();
}

AnnotationService::~AnnotationService() { stop(); }

void AnnotationService::install_routes() {
    auto& srv = *server_;
    // SO_REUSEADDR only: a second server on a busy port must fail to bind.
    srv.set_socket_options([](socket_t sock) {
        int yes = 1;
        setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
    });
    srv.set_post_routing_handler([this](const httplib::Request&, httplib::Response& res) {
        res.set_header("Access-Control-Allow-Origin", cors_origin_);
        res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
        res.set_header("Access-Control-Allow-Headers", "Content-Type");
    });
    srv.Options(R"(/api/v1/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

    srv.Get("/api/v1/status", [this](const httplib::Request&, httplib::Response& res) {
        res.set_content(hub_->status_json(), "application/json");
    });
    srv.Get("/api/v1/metrics", [this](const httplib::Request&, httplib::Response& res) {
        res.set_content(hub_->metrics_json(), "application/json");
    });
    srv.Get("/api/v1/queries/next", [this](const httplib::Request&, httplib::Response& res) {
        if (auto q = hub_->next_query()) {
            send_json(res, 200, query_object(*q));
        } else {
            res.status = 204;
            res.set_header("X-Queue-State", "empty");
        }
    });
    srv.Get("/api/v1/queries", [this](const httplib::Request&, httplib::Response& res) {
        json arr = json::array();
        for (const auto& q : hub_->pending()) arr.push_back(query_object(q));
        send_json(res, 200, {{"num_classes", hub_->num_classes()}, {"queries", arr}});
    });
    srv.Get("/api/v1/audit", [this](const httplib::Request&, httplib::Response& res) {
        json arr = json::array();
        for (const auto& row : hub_->audit_log())
            arr.push_back({{"query_id", row.query_id},
                           {"sample_id", row.sample_id},
                           {"label", row.label},
                           {"timestamp_ms", row.timestamp_ms}});
        send_json(res, 200, {{"rows", arr}});
    });
    srv.Post(R"(/api/v1/queries/(\d+)/label)", [this](const httplib::Request& req, httplib::Response& res) {
        std::int64_t query_id = 0;
        try {
            query_id = std::stoll(req.matches[1].str());
        } catch (const std::exception&) {
            send_error(res, 404, "unknown query id");
            return;
        }
        int label = 0;
        try {
            const json body = json::parse(req.body);
            if (!body.contains("label") || !body.at("label").is_number_integer()) {
                send_error(res, 400, "body must be {\"label\": <int>}");
                return;
            }
            label = body.at("label").get<int>();
        } catch (const json::exception&) {
            send_error(res, 400, "body must be JSON {\"label\": <int>}");
            return;
        }
        switch (hub_->submit_label(query_id, label)) {
            case SubmitResult::Accepted:
                send_json(res, 200, {{"status", "accepted"}, {"query_id", query_id}, {"label", label}});
                break;
            case SubmitResult::Duplicate:
                send_json(res, 200, {{"status", "duplicate"}, {"query_id", query_id}, {"label", label}});
                break;
            case SubmitResult::Conflict:
                send_json(res, 409, {{"error", "a different label was already recorded"},
                                     {"query_id", query_id},
                                     {"recorded_label", hub_->recorded_label(query_id).value_or(-1)}});
                break;
            case SubmitResult::UnknownQuery:
                send_error(res, 404, "unknown query id " + std::to_string(query_id));
                break;
            case SubmitResult::InvalidLabel:
                send_error(res, 400, "label must lie in [0, " + std::to_string(hub_->num_classes()) + ")");
                break;
        }
    });
}

int AnnotationService::start(const std::string& host, int port) {
    int bound = port;
    if (port == 0) {
        bound = server_->bind_to_any_port(host);
        if (bound < 0) throw std::runtime_error("annotation service: cannot bind " + host);
    } else if (!server_->bind_to_port(host, port)) {
        throw std::runtime_error("annotation service: cannot bind " + host + ":" + std::to_string(port) +
                                 " (port busy?)");
    }
    thread_ = std::thread([this] { server_->listen_after_bind(); });
    server_->wait_until_ready();
    return bound;
}

void AnnotationService::stop() {
    if (server_) server_->stop();
    if (thread_.joinable()) thread_.join();
}

}  // namespace xmal
