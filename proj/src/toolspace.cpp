#include "toolgym/toolspace.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <regex>
#include <sstream>

namespace toolgym {

namespace {

template <typename Enum, std::size_t N>
std::optional<Enum> lookup(std::string_view name, const Enum (&values)[N]) {
    for (Enum v : values) {
        if (to_string(v) == name) return v;
    }
    return std::nullopt;
}

bool full_match(const std::string& pattern, const std::string& value) {
    try {
        return std::regex_match(value, std::regex(pattern));
    } catch (const std::regex_error&) {
        return false;
    }
}

// Image arguments are opaque reference ids, never inline pixel data.
bool valid_image_ref(const std::string& value) {
    if (value.empty() || value.size() > 256) return false;
    if (value.rfind("data:", 0) == 0) return false;
    return std::none_of(value.begin(), value.end(),
                        [](char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; });
}

bool kind_matches(ArgKind kind, const nlohmann::json& value) {
    switch (kind) {
        case ArgKind::Text: return value.is_string();
        case ArgKind::Integer: return value.is_number_integer();
        case ArgKind::Real: return value.is_number();
        case ArgKind::ImageRef: return value.is_string() && valid_image_ref(value.get<std::string>());
        case ArgKind::Map: return value.is_object();
        case ArgKind::List: return value.is_array();
    }
    return false;
}

}  // namespace

std::string_view to_string(ToolFamily family) {
    switch (family) {
        case ToolFamily::Perception: return "Perception";
        case ToolFamily::ChartUnderstanding: return "ChartUnderstanding";
        case ToolFamily::DiagramFormalization: return "DiagramFormalization";
        case ToolFamily::MathSolver: return "MathSolver";
    }
    return "Perception";
}

std::optional<ToolFamily> tool_family_from_string(std::string_view name) {
    static constexpr ToolFamily all[] = {ToolFamily::Perception, ToolFamily::ChartUnderstanding,
                                         ToolFamily::DiagramFormalization, ToolFamily::MathSolver};
    return lookup(name, all);
}

std::string_view to_string(ArgKind kind) {
    switch (kind) {
        case ArgKind::Text: return "Text";
        case ArgKind::Integer: return "Integer";
        case ArgKind::Real: return "Real";
        case ArgKind::ImageRef: return "ImageRef";
        case ArgKind::Map: return "Map";
        case ArgKind::List: return "List";
    }
    return "Text";
}

std::optional<ArgKind> arg_kind_from_string(std::string_view name) {
    static constexpr ArgKind all[] = {ArgKind::Text,     ArgKind::Integer, ArgKind::Real,
                                      ArgKind::ImageRef, ArgKind::Map,     ArgKind::List};
    return lookup(name, all);
}

std::string_view to_string(OutputKind kind) {
    switch (kind) {
        case OutputKind::Text: return "Text";
        case OutputKind::Json: return "Json";
        case OutputKind::Number: return "Number";
    }
    return "Text";
}

std::optional<OutputKind> output_kind_from_string(std::string_view name) {
    static constexpr OutputKind all[] = {OutputKind::Text, OutputKind::Json, OutputKind::Number};
    return lookup(name, all);
}

std::string_view to_string(TaxonomyCode code) {
    switch (code) {
        case TaxonomyCode::OK: return "OK";
        case TaxonomyCode::E1: return "E1";
        case TaxonomyCode::E2: return "E2";
        case TaxonomyCode::E3: return "E3";
        case TaxonomyCode::E4: return "E4";
        case TaxonomyCode::E5: return "E5";
        case TaxonomyCode::E6: return "E6";
    }
    return "OK";
}

std::optional<TaxonomyCode> taxonomy_code_from_string(std::string_view name) {
    static constexpr TaxonomyCode all[] = {TaxonomyCode::OK, TaxonomyCode::E1, TaxonomyCode::E2, TaxonomyCode::E3,
                                           TaxonomyCode::E4, TaxonomyCode::E5, TaxonomyCode::E6};
    return lookup(name, all);
}

bool ToolSpec::has_task(std::string_view task) const {
    return std::find(tasks.begin(), tasks.end(), task) != tasks.end();
}

Registry::Registry(std::vector<ToolSpec> specs) : specs_(std::move(specs)) {
    for (std::size_t i = 0; i < specs_.size(); ++i) {
        const auto& spec = specs_[i];
        if (spec.name.empty()) throw Error("registry: tool with empty name");
        if (spec.tasks.empty()) throw Error("registry: tool `" + spec.name + "` has no tasks");
        if (!index_.emplace(spec.name, i).second) throw Error("registry: duplicate tool name `" + spec.name + "`");
    }
}

const ToolSpec* Registry::find(std::string_view name) const {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : &specs_[it->second];
}

Registry Registry::with_endpoint(const std::string& endpoint) const {
    auto copy = specs_;
    for (auto& spec : copy) spec.endpoint = endpoint;
    return Registry(std::move(copy));
}

nlohmann::json to_json(const ToolSpec& spec) {
    nlohmann::json schema = nlohmann::json::object();
    for (const auto& [name, arg] : spec.arg_schema) {
        nlohmann::json a{{"kind", to_string(arg.kind)}, {"required", arg.required}};
        if (arg.value_pattern) a["value_pattern"] = *arg.value_pattern;
        schema[name] = a;
    }
    return {{"name", spec.name},          {"family", to_string(spec.family)},
            {"tasks", spec.tasks},        {"arg_schema", schema},
            {"endpoint", spec.endpoint},  {"output_kind", to_string(spec.output_kind)}};
}

ToolSpec tool_spec_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw Error("registry: tool entry must be an object");
    ToolSpec spec;
    try {
        spec.name = j.at("name").get<std::string>();
        auto family = tool_family_from_string(j.at("family").get<std::string>());
        if (!family) throw Error("registry: unknown family for `" + spec.name + "`");
        spec.family = *family;
        spec.tasks = j.at("tasks").get<std::vector<std::string>>();
        spec.endpoint = j.at("endpoint").get<std::string>();
        if (j.contains("output_kind")) {
            auto out = output_kind_from_string(j.at("output_kind").get<std::string>());
            if (!out) throw Error("registry: unknown output_kind for `" + spec.name + "`");
            spec.output_kind = *out;
        }
        for (const auto& [arg_name, a] : j.at("arg_schema").items()) {
            ArgSpec arg;
            auto kind = arg_kind_from_string(a.at("kind").get<std::string>());
            if (!kind) throw Error("registry: unknown argument kind for `" + spec.name + "." + arg_name + "`");
            arg.kind = *kind;
            arg.required = a.value("required", false);
            if (a.contains("value_pattern")) {
                arg.value_pattern = a.at("value_pattern").get<std::string>();
                try {
                    std::regex check(*arg.value_pattern);
                } catch (const std::regex_error&) {
                    throw Error("registry: bad value_pattern for `" + spec.name + "." + arg_name + "`");
                }
            }
            spec.arg_schema.emplace(arg_name, std::move(arg));
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("registry: malformed tool entry: ") + e.what());
    }
    return spec;
}

Registry registry_from_json(const nlohmann::json& doc) {
    const nlohmann::json* entries = &doc;
    if (doc.is_object() && doc.contains("tools")) entries = &doc.at("tools");
    if (!entries->is_array()) throw Error("registry: expected an array of tool entries");
    std::vector<ToolSpec> specs;
    for (const auto& entry : *entries) specs.push_back(tool_spec_from_json(entry));
    if (specs.empty()) throw Error("registry: no tools");
    return Registry(std::move(specs));
}

Registry load_registry(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("registry: cannot open " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    const std::string text = buf.str();
    auto doc = nlohmann::json::parse(text, nullptr, false);
    if (doc.is_discarded()) throw Error("registry: " + path.string() + " is not a valid document");
    return registry_from_json(doc);
}

TaxonomyClass validate_call(const ToolCall& call, const Registry& registry) {
    const ToolSpec* spec = registry.find(call.tool);
    if (!spec) return {TaxonomyCode::E1, "unknown tool `" + call.tool + "`"};
    if (!spec->has_task(call.task)) {
        return {TaxonomyCode::E1, "tool `" + call.tool + "` has no task `" + call.task + "`"};
    }
    if (!call.arguments.is_null() && !call.arguments.is_object()) {
        return {TaxonomyCode::E1, "arguments must be a key-value map"};
    }
    const nlohmann::json args = call.arguments.is_null() ? nlohmann::json::object() : call.arguments;

    for (const auto& [name, value] : args.items()) {
        if (!spec->arg_schema.count(name)) {
            return {TaxonomyCode::E2, "invalid argument name `" + name + "` for " + call.tool + "." + call.task};
        }
    }
    for (const auto& [name, arg] : spec->arg_schema) {
        if (arg.required && !args.contains(name)) {
            return {TaxonomyCode::E2, "missing required argument `" + name + "`"};
        }
    }
    for (const auto& [name, value] : args.items()) {
        const ArgSpec& arg = spec->arg_schema.at(name);
        if (!kind_matches(arg.kind, value)) {
            return {TaxonomyCode::E3,
                    "argument `" + name + "` is not a valid " + std::string(to_string(arg.kind))};
        }
        if (arg.value_pattern && value.is_string() && !full_match(*arg.value_pattern, value.get<std::string>())) {
            return {TaxonomyCode::E3, "argument `" + name + "` does not match " + *arg.value_pattern};
        }
    }
    return {TaxonomyCode::OK, ""};
}

bool output_meets_contract(std::string_view payload, OutputKind kind) {
    switch (kind) {
        case OutputKind::Text:
            return std::any_of(payload.begin(), payload.end(),
                               [](char c) { return !std::isspace(static_cast<unsigned char>(c)); });
        case OutputKind::Json: return !nlohmann::json::parse(payload.begin(), payload.end(), nullptr, false).is_discarded();
        case OutputKind::Number: {
            std::string s(payload);
            const char* begin = s.c_str();
            char* end = nullptr;
            std::strtod(begin, &end);
            if (end == begin) return false;
            while (*end && std::isspace(static_cast<unsigned char>(*end))) ++end;
            return *end == '\0';
        }
    }
    return false;
}

std::vector<TaxonomyCode> outcome_labels(TaxonomyCode static_code, const OutcomeContext& ctx, OutputKind output_kind,
                                         bool arguments_mismatch) {
    std::vector<TaxonomyCode> labels;
    bool tool_output_invalid = false;
    if (ctx.schema_error) {
        labels.push_back(TaxonomyCode::E1);
    } else if (static_code != TaxonomyCode::OK) {
        labels.push_back(static_code);
    } else {
        if (arguments_mismatch) labels.push_back(TaxonomyCode::E4);
        if (ctx.observation.kind == ObservationKind::ToolError) {
            tool_output_invalid = true;
        } else if (ctx.observation.kind == ObservationKind::ToolOutput) {
            tool_output_invalid = !output_meets_contract(ctx.observation.payload, output_kind);
        }
        if (tool_output_invalid) labels.push_back(TaxonomyCode::E5);
    }
    // Post-tool reasoning failure: the answer is wrong and the tool is not to
    // blame for it.
    if (!ctx.final_correct && !tool_output_invalid && ctx.observation.kind != ObservationKind::EnvError) {
        labels.push_back(TaxonomyCode::E6);
    }
    return labels;
}

std::vector<TaxonomyCode> classify_outcome(const ToolCall& call, const OutcomeContext& ctx,
                                           const Registry& registry) {
    if (ctx.schema_error) return outcome_labels(TaxonomyCode::E1, ctx, OutputKind::Text);
    const auto cls = validate_call(call, registry);
    if (!cls.ok()) return outcome_labels(cls.code, ctx, OutputKind::Text);
    const nlohmann::json args = call.arguments.is_null() ? nlohmann::json::object() : call.arguments;
    const bool mismatch = ctx.reference_arguments && args != *ctx.reference_arguments;
    return outcome_labels(TaxonomyCode::OK, ctx, registry.find(call.tool)->output_kind, mismatch);
}

}  // namespace toolgym
