#include "mqttsec/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace mqttsec::stats {

Summary summary_stats(std::span<const double> samples)
{
    if (samples.empty())
        throw std::invalid_argument("summary_stats: empty sample set");

    Summary s;
    s.count = samples.size();
    s.avg = std::accumulate(samples.begin(), samples.end(), 0.0) / static_cast<double>(s.count);

    double sq = 0.0;
    for (double v : samples)
    {
        const double d = v - s.avg;
        sq += d * d;
    }
    s.stddev = std::sqrt(sq / static_cast<double>(s.count));

    auto [mn, mx] = std::minmax_element(samples.begin(), samples.end());
    s.min = *mn;
    s.max = *mx;

    std::vector<double> sorted(samples.begin(), samples.end());
    std::sort(sorted.begin(), sorted.end());
    const std::size_t mid = s.count / 2;
    if (s.count % 2 == 1)
        s.median = sorted[mid];
    else
        s.median = (sorted[mid - 1] + sorted[mid]) / 2.0;

    return s;
}

} // namespace mqttsec::stats
