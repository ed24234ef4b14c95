#include "evsim/signals.hpp"

#include "evsim/errors.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace evsim {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

double parse_number(const std::string& cell, const std::string& name, std::size_t row) {
    const std::string t = trim(cell);
    double out = 0.0;
    const char* first = t.data();
    const char* last = t.data() + t.size();
    auto [ptr, ec] = std::from_chars(first, last, out);
    if (ec != std::errc{} || ptr != last || t.empty()) {
        throw IoError(name + ": non-numeric cell '" + cell + "' at row " + std::to_string(row));
    }
    return out;
}

} // namespace

TimeSeries::TimeSeries(std::vector<SimTime> breakpoints, std::vector<double> values)
    : breakpoints_(std::move(breakpoints)), values_(std::move(values)) {
    if (breakpoints_.empty() || breakpoints_.size() != values_.size()) {
        throw ConfigError("TimeSeries: need equally many breakpoints and values, at least one");
    }
    for (std::size_t i = 1; i < breakpoints_.size(); ++i) {
        if (!(breakpoints_[i] > breakpoints_[i - 1])) {
            throw ConfigError("TimeSeries: breakpoints must be strictly increasing");
        }
    }
}

TimeSeries TimeSeries::constant(double value, SimTime from) {
    return TimeSeries({from}, {value});
}

double TimeSeries::value_at(SimTime t) const {
    if (t < breakpoints_.front()) {
        throw ConfigError("TimeSeries: query at t=" + std::to_string(t) +
                          " before first breakpoint " + std::to_string(breakpoints_.front()));
    }
    auto it = std::upper_bound(breakpoints_.begin(), breakpoints_.end(), t);
    return values_[static_cast<std::size_t>(it - breakpoints_.begin()) - 1];
}

TimeSeries load_series(std::istream& in, const std::string& name) {
    std::string line;
    if (!std::getline(in, line)) {
        throw IoError(name + ": empty file");
    }
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line) != "time_s,value") {
        throw IoError(name + ": expected header 'time_s,value', got '" + line + "'");
    }

    std::vector<SimTime> times;
    std::vector<double> values;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        ++row;
        const auto comma = line.find(',');
        if (comma == std::string::npos) {
            throw IoError(name + ": missing comma at row " + std::to_string(row));
        }
        const double t = parse_number(line.substr(0, comma), name, row);
        const double v = parse_number(line.substr(comma + 1), name, row);
        if (!times.empty() && t <= times.back()) {
            throw IoError(name + ": unsorted at row " + std::to_string(row));
        }
        times.push_back(t);
        values.push_back(v);
    }
    if (times.empty()) {
        throw IoError(name + ": no data rows");
    }
    return TimeSeries(std::move(times), std::move(values));
}

TimeSeries load_series_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open CSV file: " + path);
    }
    return load_series(in, path);
}

void write_series(std::ostream& out, const TimeSeries& series) {
    out << "time_s,value\n";
    char buf[64];
    for (std::size_t i = 0; i < series.size(); ++i) {
        auto r1 = std::to_chars(buf, buf + sizeof buf, series.breakpoints()[i]);
        out.write(buf, r1.ptr - buf);
        out.put(',');
        auto r2 = std::to_chars(buf, buf + sizeof buf, series.values()[i]);
        out.write(buf, r2.ptr - buf);
        out.put('\n');
    }
}

std::int64_t interval_index(SimTime t, double width_s) {
    if (width_s <= 0.0) throw ConfigError("interval_index: width must be positive");
    if (t < 0.0) throw ConfigError("interval_index: t must be nonnegative");
    return static_cast<std::int64_t>(std::floor(t / width_s));
}

SimTime next_interval_boundary(SimTime t, double width_s) {
    const std::int64_t k = interval_index(t, width_s);
    SimTime b = static_cast<SimTime>(k + 1) * width_s;
    // floor(t/width) can land on k with k*width marginally above t when
    // t/width rounds up; keep the boundary strictly in the future.
    while (b <= t) b += width_s;
    return b;
}

double energy_cost(const std::vector<PowerEpisode>& episodes, const TimeSeries& prices) {
    constexpr double kWsPerKwh = 3'600'000.0;
    const auto& bp = prices.breakpoints();
    double total = 0.0;
    for (const auto& ep : episodes) {
        if (ep.end_s < ep.start_s) {
            throw ConfigError("energy_cost: episode ends before it starts");
        }
        if (ep.start_s < prices.first_breakpoint()) {
            throw ConfigError("energy_cost: episode begins before the price series domain");
        }
        SimTime t = ep.start_s;
        while (t < ep.end_s) {
            auto it = std::upper_bound(bp.begin(), bp.end(), t);
            const double price = prices.values()[static_cast<std::size_t>(it - bp.begin()) - 1];
            const SimTime seg_end = (it == bp.end()) ? ep.end_s : std::min<SimTime>(*it, ep.end_s);
            total += ep.watts * (seg_end - t) / kWsPerKwh * price;
            t = seg_end;
        }
    }
    return total;
}

} // namespace evsim
