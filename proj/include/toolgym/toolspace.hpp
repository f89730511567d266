// Tool registry and the E1-E6 tool-use error taxonomy.
#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "toolgym/trajectory.hpp"

namespace toolgym {

enum class ToolFamily { Perception, ChartUnderstanding, DiagramFormalization, MathSolver };
std::string_view to_string(ToolFamily family);
std::optional<ToolFamily> tool_family_from_string(std::string_view name);

enum class ArgKind { Text, Integer, Real, ImageRef, Map, List };
std::string_view to_string(ArgKind kind);
std::optional<ArgKind> arg_kind_from_string(std::string_view name);

/// Shape a successful tool output must have to be usable downstream.
enum class OutputKind { Text, Json, Number };
std::string_view to_string(OutputKind kind);
std::optional<OutputKind> output_kind_from_string(std::string_view name);

struct ArgSpec {
    ArgKind kind = ArgKind::Text;
    bool required = false;
    std::optional<std::string> value_pattern;  // ECMAScript regex, full match on text values
};

struct ToolSpec {
    std::string name;
    ToolFamily family = ToolFamily::Perception;
    std::vector<std::string> tasks;
    std::map<std::string, ArgSpec> arg_schema;
    std::string endpoint;
    OutputKind output_kind = OutputKind::Text;

    bool has_task(std::string_view task) const;
};

struct ToolCall {
    std::string tool;
    std::string task;
    nlohmann::json arguments = nlohmann::json::object();
    std::string episode_id;
    int turn_index = 0;
};

enum class TaxonomyCode { OK, E1, E2, E3, E4, E5, E6 };
std::string_view to_string(TaxonomyCode code);
std::optional<TaxonomyCode> taxonomy_code_from_string(std::string_view name);

struct TaxonomyClass {
    TaxonomyCode code = TaxonomyCode::OK;
    std::string detail;
    bool ok() const { return code == TaxonomyCode::OK; }
};

/// Immutable set of tools, indexed by name.
class Registry {
public:
    Registry() = default;
    /// Throws Error on an empty or duplicate name or an empty task list.
    explicit Registry(std::vector<ToolSpec> specs);

    const ToolSpec* find(std::string_view name) const;
    std::span<const ToolSpec> tools() const { return specs_; }
    std::size_t size() const { return specs_.size(); }

    /// Copy with every endpoint replaced; used to point a fixture at a live server.
    Registry with_endpoint(const std::string& endpoint) const;

private:
    std::vector<ToolSpec> specs_;
    std::map<std::string, std::size_t, std::less<>> index_;
};

nlohmann::json to_json(const ToolSpec& spec);
ToolSpec tool_spec_from_json(const nlohmann::json& j);

/// Accepts either a top-level array of tool entries or {"tools": [...]}.
Registry registry_from_json(const nlohmann::json& doc);
Registry load_registry(const std::filesystem::path& path);

/// Static classification: E1 unknown tool/task, E2 argument names, E3
/// argument values. The first failing class wins.
TaxonomyClass validate_call(const ToolCall& call, const Registry& registry);

/// True when an Ok tool payload meets the tool's declared output shape.
bool output_meets_contract(std::string_view payload, OutputKind kind);

/// Context available only after the episode has finished.
struct OutcomeContext {
    // Observation returned for the call.
    Observation observation;
    bool final_correct = false;
    // Labeled gold arguments; when present, a schema-valid call whose
    // arguments differ is E4.
    std::optional<nlohmann::json> reference_arguments;
    // Set when the payload itself failed to parse (always E1).
    std::optional<std::string> schema_error;
};

/// All labels that apply to one tool call in a finished trajectory. Empty
/// means the call was fine. Labels co-occur.
std::vector<TaxonomyCode> classify_outcome(const ToolCall& call, const OutcomeContext& ctx,
                                           const Registry& registry);

/// Same labelling from an already-known static class, for replaying logs.
/// E4 applies when `arguments_mismatch` is set on a statically valid call.
std::vector<TaxonomyCode> outcome_labels(TaxonomyCode static_code, const OutcomeContext& ctx, OutputKind output_kind,
                                         bool arguments_mismatch = false);

}  // namespace toolgym
