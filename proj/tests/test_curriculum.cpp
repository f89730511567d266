#include <fstream>

#include "doctest.h"
#include "support.hpp"
#include "toolgym/curriculum.hpp"

using namespace toolgym;

namespace {

std::vector<PassRateRecord> eighths() {
    std::vector<PassRateRecord> r;
    for (int k = 0; k <= 4; ++k) r.push_back({"i" + std::to_string(k), k, 8, k / 8.0});
    return r;
}

}  // namespace

TEST_CASE("closed interval keeps the boundaries") {
    auto slice = select_slice(eighths());
    CHECK(slice.selected == std::vector<std::string>{"i1", "i2", "i3"});
    CHECK(slice.excluded_hard == 1);
    CHECK(slice.excluded_easy == 1);
    CHECK(slice.selected.size() + slice.excluded_hard + slice.excluded_easy == 5);
}

TEST_CASE("custom and invalid bounds") {
    auto slice = select_slice(eighths(), 0.0, 0.0);
    CHECK(slice.selected == std::vector<std::string>{"i0"});
    CHECK_THROWS_AS(select_slice(eighths(), 0.5, 0.25), Error);
    CHECK_THROWS_AS(select_slice(eighths(), -0.1, 0.25), Error);
    CHECK_THROWS_AS(select_slice(eighths(), 0.1, 1.5), Error);
}

TEST_CASE("manifest round trip") {
    testing::TempDir dir;
    auto slice = select_slice(eighths());
    write_manifest(slice, dir / "m.txt");
    CHECK(read_manifest(dir / "m.txt") == slice.selected);
}

TEST_CASE("rates file") {
    testing::TempDir dir;
    {
        std::ofstream out(dir / "rates.jsonl");
        for (const auto& r : eighths()) out << to_json(r).dump() << '\n';
    }
    CHECK(load_pass_rates(dir / "rates.jsonl") == eighths());
}
