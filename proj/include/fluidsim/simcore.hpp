#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <queue>
#include <string>
#include <string_view>
#include <vector>

namespace fluidsim {

/// Counter-based splittable generator. Streams are keyed by
/// (seed, component label); every draw advances a counter, so two streams
/// with different labels never interact and adding a component never
/// perturbs existing draw sequences.
class RngStream {
public:
    RngStream(std::uint64_t seed, std::string_view label);

    RngStream substream(std::string_view label) const;

    std::uint64_t next_u64();
    double uniform();                      // [0, 1)
    double uniform(double lo, double hi);  // [lo, hi)
    std::uint64_t uniform_int(std::uint64_t n); // [0, n)
    double normal();                       // standard normal, Box-Muller
    double exponential(double mean);
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i)
            std::swap(v[i - 1], v[uniform_int(i)]);
    }

private:
    RngStream(std::uint64_t key) : key_(key) {}
    static std::uint64_t mix(std::uint64_t a, std::uint64_t b);
    static std::uint64_t hash_label(std::string_view label);

    std::uint64_t key_ = 0;
    std::uint64_t counter_ = 0;
};

/// Append-only measurement log. Timestamps are non-decreasing per run.
class MetricsLog {
public:
    struct Record {
        std::string name;
        double t = 0.0;
        double value = 0.0;
        std::map<std::string, std::string> tags; // ordered for stable output
    };

    void append(std::string name, double t, double value,
                std::map<std::string, std::string> tags = {});

    const std::vector<Record>& records() const { return records_; }

    std::string to_csv() const;   // name,t_s,value,tag_k=v;...
    std::string to_jsonl() const; // one JSON object per line

private:
    std::vector<Record> records_;
    double last_t_ = 0.0;
};

/// Deterministic discrete-event engine. Events with equal time fire in
/// insertion order (monotone sequence tie-break). Strictly single-threaded.
class Engine {
public:
    using Handler = std::function<void()>;

    double now() const { return now_; }
    MetricsLog& metrics() { return metrics_; }
    const MetricsLog& metrics() const { return metrics_; }

    /// Scheduling into the past is a protocol-logic bug, not an input error.
    void schedule(double t, std::string kind, Handler fn);

    /// Fires events in (time, seq) order until the queue drains or the next
    /// event lies beyond `horizon`; the clock ends at horizon (or the last
    /// fired event when the queue drains early).
    void run_until(double horizon);

    std::size_t fired_count() const { return fired_; }

private:
    struct Event {
        double time;
        std::uint64_t seq;
        std::string kind;
        Handler fn;
    };
    struct Later {
        bool operator()(const Event& a, const Event& b) const {
            if (a.time != b.time) return a.time > b.time;
            return a.seq > b.seq;
        }
    };

    std::priority_queue<Event, std::vector<Event>, Later> queue_;
    MetricsLog metrics_;
    double now_ = 0.0;
    std::uint64_t next_seq_ = 0;
    std::size_t fired_ = 0;
};

} // namespace fluidsim
