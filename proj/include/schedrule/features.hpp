#pragma once

#include "schedrule/dataset.hpp"

#include <cstdint>
#include <set>
#include <string>
#include <vector>

namespace schedrule {

/// Binary feature over a pair of operation names with u < v lexicographically.
///
/// Ordering: 1 iff both ops are present and u precedes v.
/// SameStream: 1 iff both ops are stream-bound and share a stream.
struct Feature {
    enum class Kind { Ordering, SameStream };

    Kind kind = Kind::Ordering;
    std::string u;
    std::string v;

    static Feature ordering(std::string a, std::string b);
    static Feature same_stream(std::string a, std::string b);

    /// "<u> before <v>" or "<u> same stream as <v>".
    std::string label() const;

    auto operator<=>(const Feature&) const = default;
};

struct FeatureVocabulary {
    std::vector<Feature> features;
    std::vector<bool> retained;
    // Operation names present in every schedule of the dataset.
    std::set<std::string> always_present;
};

/// Vocabulary over every op name in the dataset; all features retained.
FeatureVocabulary build_vocabulary(const Dataset& dataset);

using FeatureRow = std::vector<std::uint8_t>;

FeatureRow featurize(const Schedule& schedule, const std::vector<Feature>& features);

struct FeatureMatrix {
    std::vector<std::string> row_keys;
    std::vector<Feature> columns;
    std::vector<FeatureRow> rows;
    std::vector<Feature> dropped; // constant columns removed
    std::set<std::string> always_present;

    std::size_t width() const { return columns.size(); }
};

/// Featurizes every record and removes constant columns.
FeatureMatrix build_matrix(const Dataset& dataset);

/// Header of human-readable feature names, then one keyed binary row per record.
std::string matrix_to_text(const FeatureMatrix& matrix);

} // namespace schedrule
