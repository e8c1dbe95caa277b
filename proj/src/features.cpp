#include "schedrule/features.hpp"

#include <algorithm>
#include <unordered_map>

namespace schedrule {

Feature Feature::ordering(std::string a, std::string b)
{
    if (b < a) {
        std::swap(a, b);
    }
    return {Kind::Ordering, std::move(a), std::move(b)};
}

Feature Feature::same_stream(std::string a, std::string b)
{
    if (b < a) {
        std::swap(a, b);
    }
    return {Kind::SameStream, std::move(a), std::move(b)};
}

std::string Feature::label() const
{
    return kind == Kind::Ordering ? u + " before " + v : u + " same stream as " + v;
}

FeatureVocabulary build_vocabulary(const Dataset& dataset)
{
    std::set<std::string> names;
    std::set<std::string> bound;
    std::unordered_map<std::string, std::size_t> occurrences;
    for (const auto& rec : dataset) {
        for (const auto& op : rec.schedule.ops) {
            names.insert(op.name);
            ++occurrences[op.name];
            if (op.kind == ExecKind::BoundGpu) {
                bound.insert(op.name);
            }
        }
    }

    FeatureVocabulary vocab;
    for (const auto& name : names) {
        if (occurrences[name] == dataset.size()) {
            vocab.always_present.insert(name);
        }
    }
    for (auto a = names.begin(); a != names.end(); ++a) {
        for (auto b = std::next(a); b != names.end(); ++b) {
            vocab.features.push_back(Feature::ordering(*a, *b));
        }
    }
    for (auto a = bound.begin(); a != bound.end(); ++a) {
        for (auto b = std::next(a); b != bound.end(); ++b) {
            vocab.features.push_back(Feature::same_stream(*a, *b));
        }
    }
    vocab.retained.assign(vocab.features.size(), true);
    return vocab;
}

FeatureRow featurize(const Schedule& schedule, const std::vector<Feature>& features)
{
    std::unordered_map<std::string, std::size_t> position;
    std::unordered_map<std::string, int> stream;
    for (std::size_t i = 0; i < schedule.ops.size(); ++i) {
        const auto& op = schedule.ops[i];
        position.emplace(op.name, i);
        if (op.kind == ExecKind::BoundGpu) {
            stream.emplace(op.name, op.stream);
        }
    }
    FeatureRow row(features.size(), 0);
    for (std::size_t j = 0; j < features.size(); ++j) {
        const Feature& f = features[j];
        if (f.kind == Feature::Kind::Ordering) {
            auto pu = position.find(f.u);
            auto pv = position.find(f.v);
            row[j] = pu != position.end() && pv != position.end() && pu->second < pv->second;
        } else {
            auto su = stream.find(f.u);
            auto sv = stream.find(f.v);
            row[j] = su != stream.end() && sv != stream.end() && su->second == sv->second;
        }
    }
    return row;
}

FeatureMatrix build_matrix(const Dataset& dataset)
{
    FeatureVocabulary vocab = build_vocabulary(dataset);
    std::vector<FeatureRow> full;
    FeatureMatrix out;
    out.always_present = vocab.always_present;
    for (const auto& rec : dataset) {
        out.row_keys.push_back(rec.schedule.canonical_key);
        full.push_back(featurize(rec.schedule, vocab.features));
    }

    std::vector<std::size_t> keep;
    for (std::size_t j = 0; j < vocab.features.size(); ++j) {
        bool constant = full.empty() || std::all_of(full.begin(), full.end(), [&](const FeatureRow& r) { return r[j] == full[0][j]; });
        if (constant) {
            out.dropped.push_back(vocab.features[j]);
        } else {
            keep.push_back(j);
            out.columns.push_back(vocab.features[j]);
        }
    }
    for (const auto& r : full) {
        FeatureRow slim;
        slim.reserve(keep.size());
        for (std::size_t j : keep) {
            slim.push_back(r[j]);
        }
        out.rows.push_back(std::move(slim));
    }
    return out;
}

std::string matrix_to_text(const FeatureMatrix& matrix)
{
    std::string out = "key";
    for (const auto& f : matrix.columns) {
        out += '\t' + f.label();
    }
    out += '\n';
    for (std::size_t i = 0; i < matrix.rows.size(); ++i) {
        out += matrix.row_keys[i];
        for (auto value : matrix.rows[i]) {
            out += value ? "\t1" : "\t0";
        }
        out += '\n';
    }
    return out;
}

} // namespace schedrule
