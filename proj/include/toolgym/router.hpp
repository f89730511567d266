// HTTP dispatch of tool calls to tool servers.
//
// Wire format (one request per call):
//   POST /call   {"correlation_id", "tool", "task", "arguments", "image_refs"}
//             -> {"correlation_id", "status": "ok"|"tool_error", "payload"}
//   GET /health  -> "ok" | "unhealthy"
//   GET /metrics -> "queue_depth N\nrequests_served N\nmax_in_flight N\n"
#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "toolgym/toolspace.hpp"

namespace toolgym {

struct ToolRequest {
    std::string correlation_id;
    std::string tool;
    std::string task;
    nlohmann::json arguments = nlohmann::json::object();
    std::vector<std::string> image_refs;
    std::int64_t deadline_ms = 30'000;
};

enum class ResponseStatus { Ok, ToolError, Timeout, Unreachable };
std::string_view to_string(ResponseStatus status);

struct ToolResponse {
    std::string correlation_id;
    ResponseStatus status = ResponseStatus::Ok;
    std::string payload;
    std::int64_t latency_ms = 0;
    int attempts = 0;  // HTTP attempts made; 0 when rejected without network
};

nlohmann::json to_json(const ToolRequest& req);
ToolRequest tool_request_from_json(const nlohmann::json& j);

struct HealthReport {
    std::string endpoint;
    bool healthy = false;
    std::int64_t queue_depth = 0;
    std::int64_t requests_served = 0;
    std::int64_t max_in_flight = 0;
};

/// GET /health and /metrics. Never throws; unreachable means healthy=false
/// with zeroed counters.
HealthReport probe(const std::string& endpoint, std::int64_t timeout_ms = 2'000);

/// Parses the `name value` lines of a /metrics body.
std::map<std::string, std::int64_t> parse_metrics(std::string_view body);

/// What the environment needs from a router. Implementations must be safe to
/// share across episode workers.
class ToolRouter {
public:
    virtual ~ToolRouter() = default;

    /// Exactly one response per request, in request order. Never throws for
    /// network conditions.
    virtual std::vector<ToolResponse> dispatch_batch(std::span<const ToolRequest> requests) = 0;
    virtual const Registry& registry() const = 0;

    ToolResponse dispatch(const ToolRequest& request);
};

struct RouterConfig {
    std::int64_t default_deadline_ms = 30'000;
    int retries = 1;
    std::int64_t retry_backoff_ms = 100;
    int per_endpoint_concurrency = 24;
};

class HttpToolRouter final : public ToolRouter {
public:
    explicit HttpToolRouter(Registry registry, RouterConfig config = {});
    ~HttpToolRouter() override;

    std::vector<ToolResponse> dispatch_batch(std::span<const ToolRequest> requests) override;
    const Registry& registry() const override { return registry_; }
    const RouterConfig& config() const { return config_; }

private:
    class Limiter;
    ToolResponse call_one(const ToolRequest& request);

    Registry registry_;
    RouterConfig config_;
    std::map<std::string, std::unique_ptr<Limiter>> limiters_;  // per endpoint
};

}  // namespace toolgym
