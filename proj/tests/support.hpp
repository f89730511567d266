// Shared helpers for the unit tests and the acceptance binary.
#pragma once

#include <atomic>
#include <filesystem>
#include <functional>
#include <mutex>
#include <random>
#include <string>
#include <unistd.h>

#include "toolgym/env.hpp"
#include "toolgym/mock_server.hpp"
#include "toolgym/router.hpp"

namespace testing {

inline std::filesystem::path fixture(const std::string& name) { return std::filesystem::path(TOOLGYM_FIXTURES) / name; }

inline toolgym::Registry fixture_registry() { return toolgym::load_registry(fixture("registry.json")); }

// Per-test scratch directory, removed on destruction.
class TempDir {
public:
    TempDir() {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("toolgym-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

// In-process router: answers every request through a callback, no sockets.
class FakeRouter final : public toolgym::ToolRouter {
public:
    using Handler = std::function<toolgym::ToolResponse(const toolgym::ToolRequest&)>;

    FakeRouter(toolgym::Registry registry, Handler handler)
        : registry_(std::move(registry)), handler_(std::move(handler)) {}

    std::vector<toolgym::ToolResponse> dispatch_batch(std::span<const toolgym::ToolRequest> requests) override {
        std::vector<toolgym::ToolResponse> out;
        for (const auto& r : requests) {
            {
                std::lock_guard lock(mu_);
                seen_.push_back(r);
            }
            auto resp = handler_(r);
            resp.correlation_id = r.correlation_id;
            out.push_back(std::move(resp));
        }
        return out;
    }
    const toolgym::Registry& registry() const override { return registry_; }

    std::vector<toolgym::ToolRequest> seen() const {
        std::lock_guard lock(mu_);
        return seen_;
    }

private:
    toolgym::Registry registry_;
    Handler handler_;
    mutable std::mutex mu_;
    std::vector<toolgym::ToolRequest> seen_;
};

inline toolgym::ToolResponse ok_response(std::string payload) {
    return {"", toolgym::ResponseStatus::Ok, std::move(payload), 1, 1};
}

inline std::string call_turn(const std::string& tool, const std::string& task, const nlohmann::json& args,
                             const std::string& think = "I should call a tool.") {
    nlohmann::json doc{{"tool", tool}, {"task", task}, {"arguments", args.is_null() ? nlohmann::json::object() : args}};
    return "<think>" + think + "</think><tool_call>" + doc.dump() + "</tool_call>";
}

inline std::string answer_turn(const std::string& answer, const std::string& think = "The output settles it.") {
    return "<think>" + think + "</think><answer>" + answer + "</answer>";
}

// Think text whose word 3-gram "alpha beta gamma" repeats `times` in a row.
inline std::string repeated_think(int times) {
    std::string s = "Let me look.";
    for (int i = 0; i < times; ++i) s += " alpha beta gamma";
    return s;
}

}  // namespace testing
