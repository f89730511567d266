#include "toolgym/router.hpp"

#include <chrono>
#include <condition_variable>
#include <future>
#include <mutex>
#include <sstream>
#include <thread>

#include "httplib.h"

namespace toolgym {

namespace {

using Clock = std::chrono::steady_clock;

std::int64_t ms_since(Clock::time_point start) {
    return std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - start).count();
}

void set_timeouts(httplib::Client& client, std::int64_t ms) {
    ms = std::max<std::int64_t>(ms, 1);
    const auto sec = static_cast<time_t>(ms / 1000);
    const auto usec = static_cast<time_t>((ms % 1000) * 1000);
    client.set_connection_timeout(sec, usec);
    client.set_read_timeout(sec, usec);
    client.set_write_timeout(sec, usec);
}

}  // namespace

std::string_view to_string(ResponseStatus status) {
    switch (status) {
        case ResponseStatus::Ok: return "Ok";
        case ResponseStatus::ToolError: return "ToolError";
        case ResponseStatus::Timeout: return "Timeout";
        case ResponseStatus::Unreachable: return "Unreachable";
    }
    return "Ok";
}

nlohmann::json to_json(const ToolRequest& req) {
    return {{"correlation_id", req.correlation_id},
            {"tool", req.tool},
            {"task", req.task},
            {"arguments", req.arguments.is_null() ? nlohmann::json::object() : req.arguments},
            {"image_refs", req.image_refs}};
}

ToolRequest tool_request_from_json(const nlohmann::json& j) {
    ToolRequest req;
    req.correlation_id = j.at("correlation_id").get<std::string>();
    req.tool = j.at("tool").get<std::string>();
    req.task = j.at("task").get<std::string>();
    req.arguments = j.value("arguments", nlohmann::json::object());
    req.image_refs = j.value("image_refs", std::vector<std::string>{});
    return req;
}

std::map<std::string, std::int64_t> parse_metrics(std::string_view body) {
    std::map<std::string, std::int64_t> out;
    std::istringstream in{std::string(body)};
    std::string line;
    while (std::getline(in, line)) {
        std::istringstream fields(line);
        std::string name;
        std::int64_t value = 0;
        if (fields >> name >> value) out[name] = value;
    }
    return out;
}

HealthReport probe(const std::string& endpoint, std::int64_t timeout_ms) {
    HealthReport report;
    report.endpoint = endpoint;
    try {
        httplib::Client client(endpoint);
        set_timeouts(client, timeout_ms);
        auto health = client.Get("/health");
        if (!health || health->status != 200) return report;
        auto metrics = client.Get("/metrics");
        if (!metrics || metrics->status != 200) return report;
        auto values = parse_metrics(metrics->body);
        report.healthy = health->body == "ok";
        report.queue_depth = values["queue_depth"];
        report.requests_served = values["requests_served"];
        report.max_in_flight = values["max_in_flight"];
    } catch (const std::exception&) {
        report = HealthReport{endpoint};
    }
    return report;
}

ToolResponse ToolRouter::dispatch(const ToolRequest& request) {
    auto responses = dispatch_batch(std::span<const ToolRequest>(&request, 1));
    return std::move(responses.front());
}

// Counting semaphore with a deadline, one per endpoint.
class HttpToolRouter::Limiter {
public:
    explicit Limiter(int slots) : free_(slots) {}

    bool acquire_until(Clock::time_point deadline) {
        std::unique_lock lock(mu_);
        if (!cv_.wait_until(lock, deadline, [&] { return free_ > 0; })) return false;
        --free_;
        return true;
    }

    void release() {
        {
            std::lock_guard lock(mu_);
            ++free_;
        }
        cv_.notify_one();
    }

private:
    std::mutex mu_;
    std::condition_variable cv_;
    int free_;
};

HttpToolRouter::HttpToolRouter(Registry registry, RouterConfig config)
    : registry_(std::move(registry)), config_(config) {
    if (config_.per_endpoint_concurrency < 1) throw Error("router: per-endpoint concurrency must be >= 1");
    if (config_.retries < 0) throw Error("router: retries must be >= 0");
    for (const auto& spec : registry_.tools()) {
        if (!limiters_.count(spec.endpoint)) {
            limiters_.emplace(spec.endpoint, std::make_unique<Limiter>(config_.per_endpoint_concurrency));
        }
    }
}

HttpToolRouter::~HttpToolRouter() = default;

std::vector<ToolResponse> HttpToolRouter::dispatch_batch(std::span<const ToolRequest> requests) {
    std::vector<ToolResponse> responses(requests.size());
    if (requests.size() == 1) {
        responses[0] = call_one(requests[0]);
        return responses;
    }
    std::vector<std::future<ToolResponse>> pending;
    pending.reserve(requests.size());
    for (const auto& req : requests) {
        pending.push_back(std::async(std::launch::async, [this, &req] { return call_one(req); }));
    }
    for (std::size_t i = 0; i < pending.size(); ++i) responses[i] = pending[i].get();
    return responses;
}

ToolResponse HttpToolRouter::call_one(const ToolRequest& request) {
    const auto start = Clock::now();
    ToolResponse response;
    response.correlation_id = request.correlation_id;

    const ToolSpec* spec = registry_.find(request.tool);
    if (!spec) {
        response.status = ResponseStatus::ToolError;
        response.payload = "unknown tool `" + request.tool + "`";
        return response;
    }
    const std::int64_t budget = request.deadline_ms > 0 ? request.deadline_ms : config_.default_deadline_ms;
    const auto deadline = start + std::chrono::milliseconds(budget);
    Limiter& limiter = *limiters_.at(spec->endpoint);
    if (!limiter.acquire_until(deadline)) {
        response.status = ResponseStatus::Timeout;
        response.payload = "deadline exceeded waiting for endpoint capacity";
        response.latency_ms = ms_since(start);
        return response;
    }

    const std::string body = to_json(request).dump();
    for (;;) {
        ++response.attempts;
        const std::int64_t remaining = budget - ms_since(start);
        if (remaining <= 0) {
            response.status = ResponseStatus::Timeout;
            response.payload = "deadline exceeded";
            break;
        }
        httplib::Client client(spec->endpoint);
        set_timeouts(client, remaining);
        auto result = client.Post("/call", body, "application/json");
        if (result) {
            auto doc = nlohmann::json::parse(result->body, nullptr, false);
            if (result->status == 200 && doc.is_object() && doc.value("status", "") == "ok") {
                response.status = ResponseStatus::Ok;
                response.payload = doc.value("payload", "");
            } else {
                response.status = ResponseStatus::ToolError;
                response.payload = doc.is_object() ? doc.value("payload", result->body) : result->body;
            }
            break;
        }
        if (ms_since(start) >= budget) {
            response.status = ResponseStatus::Timeout;
            response.payload = "deadline exceeded";
            break;
        }
        if (response.attempts > config_.retries) {
            response.status = ResponseStatus::Unreachable;
            response.payload = "endpoint unreachable: " + httplib::to_string(result.error());
            break;
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(config_.retry_backoff_ms));
    }
    limiter.release();
    response.latency_ms = ms_since(start);
    return response;
}

}  // namespace toolgym
