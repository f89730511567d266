#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "toolgym/toolspace.hpp"

namespace toolgym {

/// One scripted reply. `arguments` unset matches any arguments; otherwise the
/// request arguments must compare equal as documents.
struct MockScriptEntry {
    std::string tool;
    std::string task;
    std::optional<nlohmann::json> arguments;
    std::string payload;
    bool tool_error = false;
};

nlohmann::json to_json(const MockScriptEntry& entry);
MockScriptEntry mock_entry_from_json(const nlohmann::json& j);
/// One entry per line; blank lines ignored.
std::vector<MockScriptEntry> load_mock_script(const std::filesystem::path& path);

/// A wildcard entry for every (tool, task) in the registry, returning a
/// payload that satisfies the tool's output contract.
std::vector<MockScriptEntry> default_mock_script(const Registry& registry);

struct MockServerConfig {
    std::string host = "127.0.0.1";
    int port = 0;  // 0 picks a free port
    std::int64_t latency_ms = 0;
    double fail_rate = 0.0;
    std::uint64_t seed = 0;
    std::optional<std::filesystem::path> image_dir;
    int worker_threads = 64;
};

struct MockMetrics {
    std::int64_t queue_depth = 0;
    std::int64_t requests_served = 0;
    std::int64_t max_in_flight = 0;
};

/// Scripted stand-in for a model-backed tool service. Serves POST /call,
/// GET /health and GET /metrics on a background thread.
class MockToolServer {
public:
    MockToolServer(Registry tools, std::vector<MockScriptEntry> script, MockServerConfig config = {});
    ~MockToolServer();
    MockToolServer(const MockToolServer&) = delete;
    MockToolServer& operator=(const MockToolServer&) = delete;

    /// Binds and starts serving. Throws Error if the port cannot be bound.
    void start();
    /// Stops accepting connections and waits for in-flight calls to finish.
    void stop();
    bool running() const;

    int port() const { return port_; }
    std::string endpoint() const;
    MockMetrics metrics() const;
    void set_healthy(bool healthy) { healthy_ = healthy; }

    /// Handles one /call body; exposed so scripts can be tested without sockets.
    nlohmann::json handle_call(const nlohmann::json& request);

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    Registry tools_;
    std::vector<MockScriptEntry> script_;
    MockServerConfig config_;
    int port_ = 0;
    std::thread thread_;
    std::atomic<bool> healthy_{true};
    std::atomic<std::int64_t> in_flight_{0};
    std::atomic<std::int64_t> served_{0};
    std::atomic<std::int64_t> max_in_flight_{0};
};

}  // namespace toolgym
