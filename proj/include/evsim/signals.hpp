#pragma once

#include "evsim/kernel.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace evsim {

/// A charging interval: constant `watts` delivered over [start_s, end_s).
struct PowerEpisode {
    SimTime start_s = 0.0;
    SimTime end_s = 0.0;
    double watts = 0.0;
};

/// Right-open step function over time. values[k] holds on
/// [breakpoints[k], breakpoints[k+1]); the last value extends indefinitely.
/// Queries before the first breakpoint are errors, not extrapolation.
class TimeSeries {
public:
    TimeSeries(std::vector<SimTime> breakpoints, std::vector<double> values);

    /// Constant series: `value` for all t >= from.
    static TimeSeries constant(double value, SimTime from = 0.0);

    double value_at(SimTime t) const;

    SimTime first_breakpoint() const { return breakpoints_.front(); }
    std::size_t size() const { return breakpoints_.size(); }
    const std::vector<SimTime>& breakpoints() const { return breakpoints_; }
    const std::vector<double>& values() const { return values_; }

private:
    std::vector<SimTime> breakpoints_;
    std::vector<double> values_;
};

/// Parse a `time_s,value` CSV (UTF-8, '.' decimal separator, time-sorted
/// rows) into a step function. Errors name the offending data row.
TimeSeries load_series(std::istream& in, const std::string& name);
TimeSeries load_series_file(const std::string& path);

/// Write a series back out in the same CSV schema.
void write_series(std::ostream& out, const TimeSeries& series);

/// Index of the global interval of the given width containing t;
/// interval k spans [k*width, (k+1)*width).
std::int64_t interval_index(SimTime t, double width_s);

/// Start of the first interval boundary strictly after t.
SimTime next_interval_boundary(SimTime t, double width_s);

/// Cost of delivering the episodes under the given price signal
/// (currency per kWh). The integral is split exactly at price breakpoints.
double energy_cost(const std::vector<PowerEpisode>& episodes, const TimeSeries& prices);

} // namespace evsim
