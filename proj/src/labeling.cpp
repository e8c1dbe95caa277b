#include "schedrule/labeling.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

namespace schedrule {

StepResponse step_convolve(std::span<const double> sorted, std::size_t radius)
{
    if (radius < 1) {
        throw LabelingError("step radius must be at least 1");
    }
    const std::size_t len = sorted.size();
    if (len <= 2 * radius) {
        throw LabelingError("array of length " + std::to_string(len) + " is too short for radius " +
                            std::to_string(radius));
    }
    StepResponse out;
    out.first_index = radius + 1;
    for (std::size_t i = radius + 1; i + radius < len; ++i) {
        double rise = 0.0;
        double fall = 0.0;
        for (std::size_t m = 1; m <= radius; ++m) {
            rise += sorted[i + m];
        }
        for (std::size_t m = 0; m < radius; ++m) {
            fall += sorted[i - m];
        }
        out.values.push_back(rise - fall);
    }
    return out;
}

std::size_t default_radius(std::size_t measurement_count)
{
    auto r = static_cast<std::size_t>(std::llround(0.005 * static_cast<double>(measurement_count)));
    return std::max<std::size_t>(1, r);
}

std::vector<std::size_t> find_peaks(std::span<const double> c)
{
    std::vector<std::size_t> peaks;
    if (c.size() < 3) {
        return peaks;
    }
    const std::size_t last = c.size() - 1;
    std::size_t i = 1;
    while (i < last) {
        if (c[i - 1] < c[i]) {
            std::size_t ahead = i + 1;
            while (ahead < last && c[ahead] == c[i]) {
                ++ahead;
            }
            if (c[ahead] < c[i]) {
                peaks.push_back((i + ahead - 1) / 2);
                i = ahead;
            }
        }
        ++i;
    }
    return peaks;
}

std::vector<double> prominences(std::span<const double> c, std::span<const std::size_t> peaks)
{
    std::vector<double> out;
    out.reserve(peaks.size());
    for (std::size_t p : peaks) {
        const double height = c[p];
        double left_min = height;
        for (std::size_t i = p + 1; i-- > 0;) {
            if (c[i] > height) {
                break;
            }
            left_min = std::min(left_min, c[i]);
        }
        double right_min = height;
        for (std::size_t i = p; i < c.size(); ++i) {
            if (c[i] > height) {
                break;
            }
            right_min = std::min(right_min, c[i]);
        }
        out.push_back(height - std::max(left_min, right_min));
    }
    return out;
}

double percentile(std::vector<double> values, double p)
{
    if (values.empty()) {
        throw LabelingError("percentile of an empty set");
    }
    if (p < 0.0 || p > 100.0) {
        throw LabelingError("percentile must lie in [0, 100]");
    }
    std::sort(values.begin(), values.end());
    double rank = p / 100.0 * static_cast<double>(values.size() - 1);
    auto lo = static_cast<std::size_t>(std::floor(rank));
    auto hi = static_cast<std::size_t>(std::ceil(rank));
    return values[lo] + (rank - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

int Labeling::label_of(const std::string& key) const
{
    for (const auto& cls : classes) {
        if (std::find(cls.members.begin(), cls.members.end(), key) != cls.members.end()) {
            return cls.id;
        }
    }
    throw LabelingError("no label for '" + key + "'");
}

const PerfClass& Labeling::class_by_id(int id) const
{
    for (const auto& cls : classes) {
        if (cls.id == id) {
            return cls;
        }
    }
    throw LabelingError("unknown class " + std::to_string(id));
}

std::map<std::string, int> Labeling::labels() const
{
    std::map<std::string, int> out;
    for (const auto& cls : classes) {
        for (const auto& key : cls.members) {
            out.emplace(key, cls.id);
        }
    }
    return out;
}

Labeling label_times(const std::vector<std::string>& keys, const std::vector<double>& times,
                     std::optional<std::size_t> radius, double pct)
{
    if (keys.size() != times.size()) {
        throw LabelingError("keys and times differ in length");
    }
    if (keys.size() < 3) {
        throw LabelingError("labeling needs at least 3 records, got " + std::to_string(keys.size()));
    }
    if (std::unordered_set<std::string>(keys.begin(), keys.end()).size() != keys.size()) {
        throw LabelingError("record keys must be unique");
    }

    std::vector<std::size_t> order(keys.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return times[a] != times[b] ? times[a] < times[b] : keys[a] < keys[b];
    });

    Labeling out;
    for (std::size_t i : order) {
        out.sorted_keys.push_back(keys[i]);
        out.sorted_times.push_back(times[i]);
    }
    out.radius = radius.value_or(default_radius(keys.size()));
    out.response = step_convolve(out.sorted_times, out.radius);

    auto local = find_peaks(out.response.values);
    auto proms = prominences(out.response.values, local);
    if (!proms.empty()) {
        out.threshold = percentile(proms, pct);
    }
    for (std::size_t j = 0; j < local.size(); ++j) {
        std::size_t pos = out.response.first_index + local[j];
        out.peaks.push_back(pos);
        out.peak_prominences.push_back(proms[j]);
        if (proms[j] >= out.threshold) {
            out.boundaries.push_back(pos);
        }
    }

    std::size_t begin = 0;
    int id = 1;
    auto close_class = [&](std::size_t end) {
        PerfClass cls;
        cls.id = id++;
        cls.min_time = out.sorted_times[begin];
        cls.max_time = out.sorted_times[end - 1];
        cls.members.assign(out.sorted_keys.begin() + static_cast<std::ptrdiff_t>(begin),
                           out.sorted_keys.begin() + static_cast<std::ptrdiff_t>(end));
        out.classes.push_back(std::move(cls));
        begin = end;
    };
    for (std::size_t b : out.boundaries) {
        close_class(b + 1);
    }
    close_class(out.sorted_times.size());
    return out;
}

Labeling make_labels(const Dataset& dataset, std::optional<std::size_t> radius, double pct)
{
    std::vector<std::string> keys;
    std::vector<double> times;
    for (const auto& rec : dataset) {
        keys.push_back(rec.schedule.canonical_key);
        times.push_back(rec.aggregate);
    }
    if (keys.size() < 3) {
        throw LabelingError("labeling needs at least 3 records, got " + std::to_string(keys.size()));
    }
    return label_times(keys, times, radius, pct);
}

std::string labeling_to_text(const Labeling& labeling)
{
    auto labels = labeling.labels();
    std::string out = "# key\ttime\tclass\n";
    for (std::size_t i = 0; i < labeling.sorted_keys.size(); ++i) {
        const auto& key = labeling.sorted_keys[i];
        out += key + '\t' + format_double(labeling.sorted_times[i]) + '\t' + std::to_string(labels.at(key)) + '\n';
    }
    out += "# class\tmin\tmax\tcount\n";
    for (const auto& cls : labeling.classes) {
        out += "# " + std::to_string(cls.id) + '\t' + format_double(cls.min_time) + '\t' +
               format_double(cls.max_time) + '\t' + std::to_string(cls.members.size()) + '\n';
    }
    return out;
}

std::string labeling_plot_data(const Labeling& labeling)
{
    auto labels = labeling.labels();
    const auto& resp = labeling.response;
    std::string out = "position\ttime\tclass\tresponse\tpeak\tprominence\tboundary\n";
    for (std::size_t i = 0; i < labeling.sorted_times.size(); ++i) {
        std::string response = "nan";
        if (i >= resp.first_index && i - resp.first_index < resp.values.size()) {
            response = format_double(resp.values[i - resp.first_index]);
        }
        auto pk = std::find(labeling.peaks.begin(), labeling.peaks.end(), i);
        bool is_peak = pk != labeling.peaks.end();
        std::string prom = is_peak ? format_double(labeling.peak_prominences[static_cast<std::size_t>(
                                         pk - labeling.peaks.begin())])
                                   : "nan";
        bool boundary =
            std::find(labeling.boundaries.begin(), labeling.boundaries.end(), i) != labeling.boundaries.end();
        out += std::to_string(i) + '\t' + format_double(labeling.sorted_times[i]) + '\t' +
               std::to_string(labels.at(labeling.sorted_keys[i])) + '\t' + response + '\t' + (is_peak ? "1" : "0") +
               '\t' + prom + '\t' + (boundary ? "1" : "0") + '\n';
    }
    return out;
}

} // namespace schedrule
