#include "doctest.h"
#include "support.hpp"
#include "toolgym/toolspace.hpp"

using namespace toolgym;
using nlohmann::json;

namespace {

TaxonomyCode code_of(const std::string& tool, const std::string& task, json args) {
    static const Registry reg = testing::fixture_registry();
    return validate_call(ToolCall{tool, task, std::move(args), "ep", 0}, reg).code;
}

}  // namespace

TEST_CASE("fixture registry") {
    auto reg = testing::fixture_registry();
    CHECK(reg.size() == 26);
    for (const char* name : {"groundingdino", "sam", "easyocr", "unichart", "deplot", "chartmoe", "opencv", "chartdet",
                             "chartocr", "chartassistant", "chartvlm", "diagram_formalizer", "image_cdl", "text_cdl",
                             "construction_cdl", "goal_cdl", "inter_gps", "gllava", "multimath"}) {
        CHECK_MESSAGE(reg.find(name), name);
    }
    CHECK(reg.find("chartmoe")->has_task("analyze"));
    CHECK_FALSE(reg.find("nope"));
}

TEST_CASE("registry rejects bad specs") {
    ToolSpec a{"a", ToolFamily::Perception, {"t"}, {}, "http://x", OutputKind::Text};
    CHECK_THROWS_AS(Registry({a, a}), Error);
    ToolSpec no_tasks{"b", ToolFamily::Perception, {}, {}, "http://x", OutputKind::Text};
    CHECK_THROWS_AS(Registry({no_tasks}), Error);
    CHECK_THROWS_AS(registry_from_json(json::array()), Error);
}

TEST_CASE("ToolSpec json round trip") {
    auto reg = testing::fixture_registry();
    for (const auto& spec : reg.tools()) {
        auto back = tool_spec_from_json(to_json(spec));
        CHECK(back.name == spec.name);
        CHECK(back.tasks == spec.tasks);
        CHECK(back.arg_schema.size() == spec.arg_schema.size());
        CHECK(back.output_kind == spec.output_kind);
    }
    auto moved = reg.with_endpoint("http://127.0.0.1:1");
    for (const auto& spec : moved.tools()) CHECK(spec.endpoint == "http://127.0.0.1:1");
}

TEST_CASE("static classes, first failure wins") {
    CHECK(code_of("gllava", "solve", {{"image", "geo.png"}, {"problem", "p"}}) == TaxonomyCode::OK);
    CHECK(code_of("geometry_solver", "solve", json::object()) == TaxonomyCode::E1);
    CHECK(code_of("gllava", "answer", json::object()) == TaxonomyCode::E1);
    CHECK(code_of("gllava", "solve", json::array()) == TaxonomyCode::E1);
    CHECK(code_of("chartmoe", "to_table", {{"img", "bar.png"}}) == TaxonomyCode::E2);
    CHECK(code_of("groundingdino", "detect", {{"image", "geo.png"}}) == TaxonomyCode::E2);
    CHECK(code_of("inter_gps", "solve", {{"max_steps", "ten"}}) == TaxonomyCode::E3);
    CHECK(code_of("inter_gps", "solve", {{"max_steps", 3}}) == TaxonomyCode::OK);
    CHECK(code_of("gllava", "solve", {{"image", "data:image/png;base64,AAAA"}}) == TaxonomyCode::E3);
    CHECK(code_of("gllava", "solve", {{"image", "has space.png"}}) == TaxonomyCode::E3);
    CHECK(code_of("opencv", "detect_primitives", {{"mode", "edges"}}) == TaxonomyCode::OK);
    CHECK(code_of("opencv", "detect_primitives", {{"mode", "edges2"}}) == TaxonomyCode::E3);
    // wrong name beats wrong value
    CHECK(code_of("inter_gps", "solve", {{"max_steps", "ten"}, {"bogus", 1}}) == TaxonomyCode::E2);
    // a base64 blob under an unknown key
    CHECK(code_of("multimath", "solve_the_problem", {{"image_url", "u"}, {"data", {{"image/png", "base64,iVBOR"}}}}) ==
          TaxonomyCode::E2);
}

TEST_CASE("outcome labels") {
    auto reg = testing::fixture_registry();
    ToolCall good{"gllava", "solve", {{"image", "geo.png"}}, "ep", 0};
    OutcomeContext ctx;
    ctx.observation = Observation{ObservationKind::ToolOutput, "x = 15", "gllava", 1};
    ctx.final_correct = true;
    CHECK(classify_outcome(good, ctx, reg).empty());

    ctx.final_correct = false;
    CHECK(classify_outcome(good, ctx, reg) == std::vector{TaxonomyCode::E6});

    ctx.observation.kind = ObservationKind::ToolError;
    CHECK(classify_outcome(good, ctx, reg) == std::vector{TaxonomyCode::E5});

    ctx.observation.kind = ObservationKind::EnvError;
    CHECK(classify_outcome(good, ctx, reg).empty());

    ctx.observation.kind = ObservationKind::ToolOutput;
    ctx.reference_arguments = json{{"image", "other.png"}};
    CHECK(classify_outcome(good, ctx, reg) == std::vector{TaxonomyCode::E4, TaxonomyCode::E6});

    ToolCall bad{"chartmoe", "to_table", {{"img", "bar.png"}}, "ep", 0};
    ctx.reference_arguments.reset();
    ctx.observation.kind = ObservationKind::ToolError;
    CHECK(classify_outcome(bad, ctx, reg) == std::vector{TaxonomyCode::E2, TaxonomyCode::E6});
}

TEST_CASE("output contracts") {
    CHECK(output_meets_contract("text", OutputKind::Text));
    CHECK_FALSE(output_meets_contract(" \n", OutputKind::Text));
    CHECK(output_meets_contract("{\"a\":1}", OutputKind::Json));
    CHECK_FALSE(output_meets_contract("{a", OutputKind::Json));
    CHECK(output_meets_contract("3.5 ", OutputKind::Number));
    CHECK_FALSE(output_meets_contract("3.5x", OutputKind::Number));
}
