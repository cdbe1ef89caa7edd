#ifndef PRB_TELEMETRY_HPP
#define PRB_TELEMETRY_HPP

#include <atomic>
#include <chrono>
#include <cstdint>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace prb::bench {

/**
 * Coarse self-telemetry: a sampler thread records this process's
 * resident memory at a fixed cadence while a phase is open. Where the
 * platform exposes no memory probe the samples carry rss_bytes = -1 and
 * the CSV header says so.
 */
class TelemetrySampler {
public:
    struct Sample {
        std::string phase;
        double elapsed_s = 0.0;
        long long rss_bytes = -1;
    };

    explicit TelemetrySampler(int interval_ms = 100);
    ~TelemetrySampler();

    void begin_phase(const std::string& phase);
    void end_phase();

    std::vector<Sample> samples() const;
    /// Largest rss seen across all samples; -1 when unavailable.
    long long peak_rss_bytes() const;
    void clear();

    void write_csv(const std::string& path) const;

    /// Own-process resident set size; -1 where unsupported.
    static long long read_rss_bytes();
    static bool rss_available();

private:
    void loop();

    int interval_ms_;
    std::atomic<bool> running_{false};
    std::atomic<bool> phase_open_{false};
    std::thread worker_;
    mutable std::mutex mutex_;
    std::string phase_;
    std::chrono::steady_clock::time_point phase_start_;
    std::vector<Sample> samples_;
};

} // namespace prb::bench

#endif // PRB_TELEMETRY_HPP
