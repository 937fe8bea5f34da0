#include "fluidsim/simcore.hpp"

#include <cassert>
#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <utility>

namespace fluidsim {

namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

std::uint64_t splitmix_finalize(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ull;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBull;
    z ^= z >> 31;
    return z;
}

} // namespace

RngStream::RngStream(std::uint64_t seed, std::string_view label)
    : key_(mix(splitmix_finalize(seed + kGolden), hash_label(label))) {}

RngStream RngStream::substream(std::string_view label) const {
    return RngStream(mix(key_, hash_label(label)));
}

std::uint64_t RngStream::mix(std::uint64_t a, std::uint64_t b) {
    return splitmix_finalize(a ^ (b + kGolden + (a << 6) + (a >> 2)));
}

std::uint64_t RngStream::hash_label(std::string_view label) {
    // FNV-1a
    std::uint64_t h = 0xCBF29CE484222325ull;
    for (unsigned char c : label) {
        h ^= c;
        h *= 0x100000001B3ull;
    }
    return h;
}

std::uint64_t RngStream::next_u64() {
    return splitmix_finalize(key_ + (++counter_) * kGolden);
}

double RngStream::uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::uniform(double lo, double hi) {
    return lo + (hi - lo) * uniform();
}

std::uint64_t RngStream::uniform_int(std::uint64_t n) {
    if (n == 0) return 0;
    // Rejection sampling to avoid modulo bias.
    const std::uint64_t limit = n * ((~std::uint64_t{0}) / n);
    std::uint64_t x;
    do {
        x = next_u64();
    } while (x >= limit);
    return x % n;
}

double RngStream::normal() {
    // Box-Muller; one value per call keeps the draw count predictable.
    double u1 = uniform();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

double RngStream::exponential(double mean) {
    double u = uniform();
    if (u >= 1.0) u = 1.0 - 0x1.0p-53;
    return -mean * std::log1p(-u);
}

void MetricsLog::append(std::string name, double t, double value,
                        std::map<std::string, std::string> tags) {
    if (!records_.empty() && t < last_t_)
        throw std::logic_error("MetricsLog: non-monotone timestamp for '" + name + "'");
    last_t_ = t;
    records_.push_back(Record{std::move(name), t, value, std::move(tags)});
}

namespace {

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

} // namespace

std::string MetricsLog::to_csv() const {
    std::string out = "name,t_s,value,tags\n";
    for (const auto& r : records_) {
        out += r.name;
        out += ',';
        out += format_double(r.t);
        out += ',';
        out += format_double(r.value);
        out += ',';
        bool first = true;
        for (const auto& [k, v] : r.tags) {
            if (!first) out += ';';
            out += k;
            out += '=';
            out += v;
            first = false;
        }
        out += '\n';
    }
    return out;
}

std::string MetricsLog::to_jsonl() const {
    std::string out;
    for (const auto& r : records_) {
        out += "{\"name\":\"" + r.name + "\",\"t_s\":" + format_double(r.t) +
               ",\"value\":" + format_double(r.value) + ",\"tags\":{";
        bool first = true;
        for (const auto& [k, v] : r.tags) {
            if (!first) out += ',';
            out += "\"" + k + "\":\"" + v + "\"";
            first = false;
        }
        out += "}}\n";
    }
    return out;
}

void Engine::schedule(double t, std::string kind, Handler fn) {
    if (t < now_)
        throw std::logic_error("Engine::schedule: event '" + kind +
                               "' scheduled into the past");
    queue_.push(Event{t, next_seq_++, std::move(kind), std::move(fn)});
}

void Engine::run_until(double horizon) {
    while (!queue_.empty() && queue_.top().time <= horizon) {
        Event ev = queue_.top();
        queue_.pop();
        assert(ev.time >= now_);
        now_ = ev.time;
        ++fired_;
        ev.fn();
    }
    if (now_ < horizon) now_ = horizon;
}

} // namespace fluidsim
