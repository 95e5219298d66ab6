#ifndef MQTTSEC_STATS_HPP
#define MQTTSEC_STATS_HPP

#include <cstddef>
#include <span>

namespace mqttsec::stats {

struct Summary {
    double avg = 0.0;
    double stddev = 0.0; // population standard deviation
    double min = 0.0;
    double max = 0.0;
    double median = 0.0; // midpoint average for even counts
    std::size_t count = 0;
};

// Throws std::invalid_argument on an empty sample set.
Summary summary_stats(std::span<const double> samples);

} // namespace mqttsec::stats

#endif
