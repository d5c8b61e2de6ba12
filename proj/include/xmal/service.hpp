#pragma once

#include <memory>
#include <string>
#include <thread>

#include "xmal/annotation_hub.hpp"

namespace httplib {
class Server;
}

namespace xmal {

/// JSON wire form of a pending query (never carries ground truth).
std::string query_json(const PendingQuery& q);

/// HTTP/1.1 + JSON front end of an AnnotationHub.
///
///   GET  /api/v1/status              iteration, pool sizes, accuracy history
///   GET  /api/v1/queries/next        first unanswered query, or 204
///   GET  /api/v1/queries             all unanswered queries
///   POST /api/v1/queries/{id}/label  body {"label": <int>}
///   GET  /api/v1/metrics             the metrics log
///   GET  /api/v1/audit               accepted submissions, in order
///
/// Label submissions only touch the hub; the runner applies them.
class AnnotationService {
public:
    explicit AnnotationService(AnnotationHub& hub, std::string cors_origin = "*");
    ~AnnotationService();
    AnnotationService(const AnnotationService&) = delete;
    AnnotationService& operator=(const AnnotationService&) = delete;

    /// Binds and serves on a background thread; `port` 0 picks a free port.
    /// Returns the bound port. Throws std::runtime_error if binding fails.
    int start(const std::string& host, int port);
    void stop();

private:
    void install_routes();

    AnnotationHub* hub_;
    std::string cors_origin_;
    std::unique_ptr<httplib::Server> server_;
    std::thread thread_;
};

}  // namespace xmal
