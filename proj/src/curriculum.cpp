#include "toolgym/curriculum.hpp"

#include <algorithm>
#include <fstream>

namespace toolgym {

CurriculumSlice select_slice(std::span<const PassRateRecord> rates, double lower, double upper) {
    if (!(0.0 <= lower && lower <= upper && upper <= 1.0)) {
        throw Error("curriculum: bounds must satisfy 0 <= lower <= upper <= 1");
    }
    CurriculumSlice slice;
    slice.lower = lower;
    slice.upper = upper;
    for (const auto& r : rates) {
        if (r.rate < lower) {
            ++slice.excluded_hard;
        } else if (r.rate > upper) {
            ++slice.excluded_easy;
        } else {
            slice.selected.push_back(r.instance_id);
        }
    }
    std::sort(slice.selected.begin(), slice.selected.end());
    return slice;
}

void write_manifest(const CurriculumSlice& slice, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("curriculum: cannot write " + path.string());
    for (const auto& id : slice.selected) out << id << '\n';
    if (!out) throw Error("curriculum: write failed for " + path.string());
}

std::vector<std::string> read_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("curriculum: cannot open " + path.string());
    std::vector<std::string> ids;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) ids.push_back(line);
    }
    return ids;
}

}  // namespace toolgym
