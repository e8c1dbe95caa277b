#pragma once

#include "schedrule/dataset.hpp"

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace schedrule {

class LabelingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Step-kernel response, defined only where the kernel fully overlaps the input.
/// values[j] belongs to input position first_index + j.
struct StepResponse {
    std::size_t first_index = 0;
    std::vector<double> values;
};

/// c_i = sum_{m=-r+1}^{r} k_m a_{i+m}, k_m = -1 for m <= 0 and +1 for m >= 1,
/// evaluated for r < i < len(a) - r.
StepResponse step_convolve(std::span<const double> sorted, std::size_t radius);

/// max(1, round(0.005 * M)).
std::size_t default_radius(std::size_t measurement_count);

/// Strict local maxima; a flat-topped peak reports its left-rounded midpoint.
std::vector<std::size_t> find_peaks(std::span<const double> c);

/// Topographic prominence of each peak.
std::vector<double> prominences(std::span<const double> c, std::span<const std::size_t> peaks);

/// Linear-interpolation percentile (p in [0, 100]) of unsorted values.
double percentile(std::vector<double> values, double p);

struct PerfClass {
    int id = 0;
    double min_time = 0.0;
    double max_time = 0.0;
    std::vector<std::string> members;
};

struct Labeling {
    std::vector<std::string> sorted_keys;
    std::vector<double> sorted_times;
    // Position b means the class changes between sorted positions b and b + 1.
    std::vector<std::size_t> boundaries;
    std::vector<PerfClass> classes;

    // Intermediate results kept for plotting.
    std::size_t radius = 0;
    StepResponse response;
    std::vector<std::size_t> peaks;       // positions in the sorted order
    std::vector<double> peak_prominences; // aligned with peaks
    double threshold = 0.0;

    int label_of(const std::string& key) const;
    const PerfClass& class_by_id(int id) const;
    std::map<std::string, int> labels() const;
};

inline constexpr double kDefaultPercentile = 98.0;

/// Labels raw (key, time) pairs; keys must be unique.
Labeling label_times(const std::vector<std::string>& keys, const std::vector<double>& times,
                     std::optional<std::size_t> radius = std::nullopt, double percentile = kDefaultPercentile);

/// Labels the aggregate times of a dataset (at least three records).
Labeling make_labels(const Dataset& dataset, std::optional<std::size_t> radius = std::nullopt,
                     double percentile = kDefaultPercentile);

/// Per-record lines (key, time, class) followed by a class summary block.
std::string labeling_to_text(const Labeling& labeling);

/// Columnar plot data: sorted position, time, class, step response, peak flags.
std::string labeling_plot_data(const Labeling& labeling);

} // namespace schedrule
