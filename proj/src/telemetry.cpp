#include "prb/telemetry.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace prb::bench {

TelemetrySampler::TelemetrySampler(int interval_ms) : interval_ms_(interval_ms) {
    if (interval_ms_ < 50)
        throw std::invalid_argument("telemetry: sampling interval must be >= 50 ms");
    running_.store(true);
    worker_ = std::thread([this] { loop(); });
}

TelemetrySampler::~TelemetrySampler() {
    running_.store(false);
    if (worker_.joinable()) worker_.join();
}

void TelemetrySampler::begin_phase(const std::string& phase) {
    std::lock_guard<std::mutex> lock(mutex_);
    phase_ = phase;
    phase_start_ = std::chrono::steady_clock::now();
    phase_open_.store(true);
}

void TelemetrySampler::end_phase() { phase_open_.store(false); }

std::vector<TelemetrySampler::Sample> TelemetrySampler::samples() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return samples_;
}

long long TelemetrySampler::peak_rss_bytes() const {
    std::lock_guard<std::mutex> lock(mutex_);
    long long peak = -1;
    for (const auto& s : samples_)
        if (s.rss_bytes > peak) peak = s.rss_bytes;
    return peak;
}

void TelemetrySampler::clear() {
    std::lock_guard<std::mutex> lock(mutex_);
    samples_.clear();
}

void TelemetrySampler::write_csv(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << "# rss=" << (rss_available() ? "available" : "unavailable") << "\n";
    out << "phase,elapsed_s,rss_bytes\n";
    for (const auto& s : samples()) {
        char line[160];
        std::snprintf(line, sizeof(line), "%s,%.3f,%lld\n", s.phase.c_str(), s.elapsed_s,
                      s.rss_bytes);
        out << line;
    }
}

long long TelemetrySampler::read_rss_bytes() {
#if defined(__linux__)
    std::FILE* f = std::fopen("/proc/self/statm", "r");
    if (!f) return -1;
    long long pages_total = 0, pages_resident = 0;
    const int n = std::fscanf(f, "%lld %lld", &pages_total, &pages_resident);
    std::fclose(f);
    if (n != 2) return -1;
    return pages_resident * 4096LL;
#else
    return -1;
#endif
}

bool TelemetrySampler::rss_available() { return read_rss_bytes() >= 0; }

void TelemetrySampler::loop() {
    while (running_.load()) {
        if (phase_open_.load()) {
            Sample s;
            s.rss_bytes = read_rss_bytes();
            {
                std::lock_guard<std::mutex> lock(mutex_);
                s.phase = phase_;
                s.elapsed_s = std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                                            phase_start_)
                                  .count();
                samples_.push_back(std::move(s));
            }
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(interval_ms_));
    }
}

} // namespace prb::bench
