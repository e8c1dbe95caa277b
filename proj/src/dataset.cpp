#include "schedrule/dataset.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace schedrule {

void Dataset::add(const Schedule& schedule, const Measurement& m)
{
    auto [it, inserted] = index_.emplace(schedule.canonical_key, records_.size());
    if (inserted) {
        records_.push_back({schedule, {}, 0.0});
    }
    DatasetRecord& rec = records_[it->second];
    rec.measurements.push_back(m);
    double sum = 0.0;
    for (const auto& x : rec.measurements) {
        sum += x.time;
    }
    rec.aggregate = sum / static_cast<double>(rec.measurements.size());
}

const DatasetRecord& Dataset::at(const std::string& key) const
{
    auto it = index_.find(key);
    if (it == index_.end()) {
        throw DatasetError("no record for schedule '" + key + "'");
    }
    return records_[it->second];
}

std::string format_double(double value)
{
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    if (ec != std::errc{}) {
        throw DatasetError("cannot format number");
    }
    return std::string(buf, ptr);
}

double parse_double(std::string_view text)
{
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (text.empty() || ec != std::errc{} || ptr != text.data() + text.size()) {
        throw DatasetError("malformed number '" + std::string(text) + "'");
    }
    return value;
}

namespace {

std::vector<std::string> split_fields(const std::string& line, char sep)
{
    std::vector<std::string> out;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, sep)) {
        out.push_back(field);
    }
    if (!line.empty() && line.back() == sep) {
        out.emplace_back();
    }
    return out;
}

std::size_t parse_count(const std::string& text)
{
    std::size_t value = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (text.empty() || ec != std::errc{} || ptr != text.data() + text.size()) {
        throw DatasetError("malformed count '" + text + "'");
    }
    return value;
}

} // namespace

std::string dataset_to_text(const Dataset& dataset)
{
    std::string out;
    for (const auto& rec : dataset) {
        out += rec.schedule.canonical_key;
        out += '\t' + format_double(rec.aggregate);
        out += '\t' + std::to_string(rec.measurements.size());
        out += '\t';
        for (std::size_t i = 0; i < rec.measurements.size(); ++i) {
            if (i) {
                out += ',';
            }
            out += format_double(rec.measurements[i].time) + '/' + std::to_string(rec.measurements[i].n_samples);
        }
        out += '\t' + serialize_ops(rec.schedule.ops);
        out += '\n';
    }
    return out;
}

Dataset dataset_from_text(std::string_view text, const ProgramDag& dag)
{
    Dataset ds;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') {
            continue;
        }
        auto fields = split_fields(line, '\t');
        try {
            if (fields.size() != 5) {
                throw DatasetError("expected 5 tab-separated fields, found " + std::to_string(fields.size()));
            }
            Schedule schedule = make_schedule(parse_ops(fields[4], dag));
            if (schedule.canonical_key != fields[0]) {
                throw DatasetError("key does not match the serialized operations");
            }
            std::size_t count = parse_count(fields[2]);
            auto entries = fields[3].empty() ? std::vector<std::string>{} : split_fields(fields[3], ',');
            if (entries.size() != count) {
                throw DatasetError("measurement count mismatch");
            }
            for (const auto& entry : entries) {
                auto slash = entry.find('/');
                if (slash == std::string::npos) {
                    throw DatasetError("malformed measurement '" + entry + "'");
                }
                Measurement m{schedule.canonical_key, parse_double(std::string_view(entry).substr(0, slash)),
                              parse_count(entry.substr(slash + 1))};
                ds.add(schedule, m);
            }
            const auto& rec = ds.at(schedule.canonical_key);
            if (format_double(rec.aggregate) != fields[1]) {
                throw DatasetError("aggregate time does not equal the mean of the measurements");
            }
        } catch (const std::exception& e) {
            throw DatasetError("dataset line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return ds;
}

void write_dataset(const Dataset& dataset, const std::string& path)
{
    std::ofstream out(path);
    out << dataset_to_text(dataset);
    if (!out) {
        throw DatasetError("cannot write dataset '" + path + "'");
    }
}

Dataset read_dataset(const std::string& path, const ProgramDag& dag)
{
    std::ifstream in(path);
    if (!in) {
        throw DatasetError("cannot open dataset '" + path + "'");
    }
    std::stringstream buf;
    buf << in.rdbuf();
    return dataset_from_text(buf.str(), dag);
}

} // namespace schedrule
