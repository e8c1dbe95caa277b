#pragma once

#include "schedrule/schedule.hpp"
#include "schedrule/simulator.hpp"

#include <string>
#include <unordered_map>
#include <vector>

namespace schedrule {

class DatasetError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct DatasetRecord {
    Schedule schedule;
    std::vector<Measurement> measurements;
    double aggregate = 0.0; // mean of measurement times

    bool operator==(const DatasetRecord&) const = default;
};

/// Measured schedules keyed by canonical key, iterated in insertion order.
class Dataset {
public:
    /// Appends a measurement, creating the record on first sight of the key.
    void add(const Schedule& schedule, const Measurement& m);

    std::size_t size() const { return records_.size(); }
    bool empty() const { return records_.empty(); }
    bool contains(const std::string& key) const { return index_.count(key) != 0; }
    const DatasetRecord& at(const std::string& key) const;
    const std::vector<DatasetRecord>& records() const { return records_; }
    auto begin() const { return records_.begin(); }
    auto end() const { return records_.end(); }

    bool operator==(const Dataset& other) const { return records_ == other.records_; }

private:
    std::vector<DatasetRecord> records_;
    std::unordered_map<std::string, std::size_t> index_;
};

/// Tab-separated, one record per line:
/// key, aggregate seconds, measurement count, measurements (time/samples, comma
/// separated), op sequence. Floats use shortest round-trip form.
std::string dataset_to_text(const Dataset& dataset);
Dataset dataset_from_text(std::string_view text, const ProgramDag& dag);

void write_dataset(const Dataset& dataset, const std::string& path);
Dataset read_dataset(const std::string& path, const ProgramDag& dag);

/// Shortest decimal string that parses back to exactly `value`.
std::string format_double(double value);
double parse_double(std::string_view text);

} // namespace schedrule
