// Tail-patch selection of hard-but-learnable instances by pass rate.
#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "toolgym/store.hpp"

namespace toolgym {

struct CurriculumSlice {
    double lower = 0.125;
    double upper = 0.375;
    std::vector<std::string> selected;  // sorted by instance id
    std::size_t excluded_easy = 0;      // rate > upper
    std::size_t excluded_hard = 0;      // rate < lower
};

/// Keeps instances with lower <= rate <= upper. Throws Error unless
/// 0 <= lower <= upper <= 1.
CurriculumSlice select_slice(std::span<const PassRateRecord> rates, double lower = 0.125, double upper = 0.375);

/// One instance id per line.
void write_manifest(const CurriculumSlice& slice, const std::filesystem::path& path);
std::vector<std::string> read_manifest(const std::filesystem::path& path);

}  // namespace toolgym
