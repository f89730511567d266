#include "toolgym/mock_server.hpp"

#include <chrono>
#include <fstream>
#include <functional>

#include "httplib.h"

namespace toolgym {

namespace {

// splitmix64 over the seed and correlation id; keeps failure injection
// independent of request arrival order.
double unit_hash(std::uint64_t seed, const std::string& key) {
    std::uint64_t x = seed ^ std::hash<std::string>{}(key);
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    x ^= x >> 31;
    return static_cast<double>(x >> 11) * 0x1.0p-53;
}

nlohmann::json reply(const std::string& id, bool ok, const std::string& payload) {
    return {{"correlation_id", id}, {"status", ok ? "ok" : "tool_error"}, {"payload", payload}};
}

}  // namespace

nlohmann::json to_json(const MockScriptEntry& entry) {
    nlohmann::json j{{"tool", entry.tool}, {"task", entry.task}, {"payload", entry.payload}};
    if (entry.arguments) j["arguments"] = *entry.arguments;
    if (entry.tool_error) j["tool_error"] = true;
    return j;
}

MockScriptEntry mock_entry_from_json(const nlohmann::json& j) {
    MockScriptEntry e;
    e.tool = j.at("tool").get<std::string>();
    e.task = j.at("task").get<std::string>();
    if (j.contains("arguments") && !(j["arguments"].is_string() && j["arguments"] == "*")) {
        e.arguments = j.at("arguments");
    }
    e.payload = j.at("payload").get<std::string>();
    e.tool_error = j.value("tool_error", false);
    return e;
}

std::vector<MockScriptEntry> load_mock_script(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("mock script: cannot open " + path.string());
    std::vector<MockScriptEntry> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            out.push_back(mock_entry_from_json(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::exception& e) {
            throw Error("mock script: line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

std::vector<MockScriptEntry> default_mock_script(const Registry& registry) {
    std::vector<MockScriptEntry> out;
    for (const auto& spec : registry.tools()) {
        for (const auto& task : spec.tasks) {
            std::string payload;
            switch (spec.output_kind) {
                case OutputKind::Text: payload = "mock " + spec.name + "." + task + " output"; break;
                case OutputKind::Json: payload = nlohmann::json{{"tool", spec.name}, {"task", task}}.dump(); break;
                case OutputKind::Number: payload = "0"; break;
            }
            out.push_back({spec.name, task, std::nullopt, payload, false});
        }
    }
    return out;
}

struct MockToolServer::Impl {
    httplib::Server server;
};

MockToolServer::MockToolServer(Registry tools, std::vector<MockScriptEntry> script, MockServerConfig config)
    : impl_(std::make_unique<Impl>()), tools_(std::move(tools)), script_(std::move(script)), config_(std::move(config)) {
    if (script_.empty()) throw Error("mock server: script must cover at least one (tool, task) pair");
    if (config_.fail_rate < 0.0 || config_.fail_rate > 1.0) throw Error("mock server: fail rate must be in [0, 1]");
}

MockToolServer::~MockToolServer() { stop(); }

nlohmann::json MockToolServer::handle_call(const nlohmann::json& request) {
    const std::string id = request.value("correlation_id", "");
    if (!request.contains("tool") || !request.contains("task")) return reply(id, false, "malformed request");
    const std::string tool = request.value("tool", "");
    const std::string task = request.value("task", "");
    const nlohmann::json args = request.value("arguments", nlohmann::json::object());

    if (config_.fail_rate > 0.0 && unit_hash(config_.seed, id) < config_.fail_rate) {
        return reply(id, false, "injected failure");
    }
    if (!tools_.find(tool)) return reply(id, false, "unknown tool `" + tool + "`");
    if (config_.image_dir) {
        for (const auto& ref : request.value("image_refs", std::vector<std::string>{})) {
            if (!std::filesystem::exists(*config_.image_dir / ref)) return reply(id, false, "image not found: " + ref);
        }
    }
    for (const auto& entry : script_) {
        if (entry.tool != tool || entry.task != task) continue;
        if (entry.arguments && *entry.arguments != args) continue;
        return reply(id, !entry.tool_error, entry.payload);
    }
    return reply(id, false, "no scripted response for " + tool + "." + task);
}

void MockToolServer::start() {
    if (running()) return;
    auto& svr = impl_->server;
    const int threads = config_.worker_threads;
    svr.new_task_queue = [threads] { return new httplib::ThreadPool(static_cast<size_t>(threads)); };
    // httplib's default adds SO_REUSEPORT, which lets a second server share
    // an occupied port silently.
    svr.set_socket_options([](socket_t sock) {
        int yes = 1;
        ::setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
    });

    svr.Get("/health", [this](const httplib::Request&, httplib::Response& res) {
        res.set_content(healthy_ ? "ok" : "unhealthy", "text/plain");
    });
    svr.Get("/metrics", [this](const httplib::Request&, httplib::Response& res) {
        auto m = metrics();
        res.set_content("queue_depth " + std::to_string(m.queue_depth) + "\nrequests_served " +
                            std::to_string(m.requests_served) + "\nmax_in_flight " +
                            std::to_string(m.max_in_flight) + "\n",
                        "text/plain");
    });
    svr.Post("/call", [this](const httplib::Request& req, httplib::Response& res) {
        const auto now = ++in_flight_;
        auto seen = max_in_flight_.load();
        while (now > seen && !max_in_flight_.compare_exchange_weak(seen, now)) {
        }
        if (config_.latency_ms > 0) std::this_thread::sleep_for(std::chrono::milliseconds(config_.latency_ms));
        auto doc = nlohmann::json::parse(req.body, nullptr, false);
        nlohmann::json out = doc.is_object() ? handle_call(doc) : reply("", false, "malformed request");
        res.set_content(out.dump(), "application/json");
        ++served_;
        --in_flight_;
    });

    if (config_.port == 0) {
        port_ = svr.bind_to_any_port(config_.host);
        if (port_ <= 0) throw Error("mock server: cannot bind " + config_.host);
    } else {
        if (!svr.bind_to_port(config_.host, config_.port)) {
            throw Error("mock server: cannot bind " + config_.host + ":" + std::to_string(config_.port) +
                        " (port in use?)");
        }
        port_ = config_.port;
    }
    thread_ = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
}

void MockToolServer::stop() {
    if (!thread_.joinable()) return;
    impl_->server.stop();
    thread_.join();
}

bool MockToolServer::running() const { return thread_.joinable() && impl_->server.is_running(); }

std::string MockToolServer::endpoint() const { return "http://" + config_.host + ":" + std::to_string(port_); }

MockMetrics MockToolServer::metrics() const {
    return {in_flight_.load(), served_.load(), max_in_flight_.load()};
}

}  // namespace toolgym
