#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "rng.hpp"

namespace relaysel {

struct Point {
    double x = 0.0;
    double y = 0.0;
};

inline double distance(Point a, Point b) { return std::hypot(a.x - b.x, a.y - b.y); }

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

enum class Fading {
    rayleigh, ///< unit-mean exponential power gain, redrawn every slot
    constant  ///< power gain fixed to 1 (deterministic links, for toy instances)
};

// Static network geometry. Distances are computed once at construction.
class Topology {
public:
    Topology(Point source, Point dest, std::vector<Point> relays, double alpha, double power_to_noise)
        : source_(source), dest_(dest), relays_(std::move(relays)), alpha_(alpha),
          power_to_noise_(power_to_noise) {
        if (relays_.empty())
            throw std::invalid_argument("topology needs at least one relay");
        if (!(alpha_ > 0.0))
            throw std::invalid_argument("path-loss exponent must be positive");
        if (!(power_to_noise_ > 0.0))
            throw std::invalid_argument("power-to-noise ratio must be positive");
        for (const auto& r : relays_) {
            d_sr_.push_back(distance(source_, r));
            d_rd_.push_back(distance(r, dest_));
            if (!(d_sr_.back() > 0.0) || !(d_rd_.back() > 0.0))
                throw std::invalid_argument("relay coincides with source or destination");
        }
    }

    // All relays at the same distance d from both source and destination.
    static Topology equidistant(std::size_t relays, double d, double alpha, double power_to_noise) {
        // Relays on the perpendicular bisector of a source-destination segment
        // of length d: every relay is then at distance d from both ends.
        const double half = d / 2.0;
        const double h = std::sqrt(d * d - half * half);
        std::vector<Point> pos(relays, Point{half, h});
        return Topology({0.0, 0.0}, {d, 0.0}, std::move(pos), alpha, power_to_noise);
    }

    std::size_t relays() const { return relays_.size(); }
    double alpha() const { return alpha_; }
    double power_to_noise() const { return power_to_noise_; }
    Point source() const { return source_; }
    Point dest() const { return dest_; }
    const std::vector<Point>& relay_positions() const { return relays_; }
    double d_sr(std::size_t k) const { return d_sr_.at(k); }
    double d_rd(std::size_t k) const { return d_rd_.at(k); }

private:
    Point source_;
    Point dest_;
    std::vector<Point> relays_;
    double alpha_;
    double power_to_noise_;
    std::vector<double> d_sr_;
    std::vector<double> d_rd_;
};

struct LinkGains {
    std::vector<double> sr; ///< |h_{S,R_k}|^2
    std::vector<double> rd; ///< |h_{R_k,D}|^2
};

// Draw order is fixed: sr[0..K) then rd[0..K).
inline LinkGains sample_gains(Rng& rng, std::size_t relays, Fading fading = Fading::rayleigh) {
    LinkGains g;
    g.sr.resize(relays);
    g.rd.resize(relays);
    if (fading == Fading::constant) {
        std::fill(g.sr.begin(), g.sr.end(), 1.0);
        std::fill(g.rd.begin(), g.rd.end(), 1.0);
        return g;
    }
    for (auto& x : g.sr)
        x = rng.exponential();
    for (auto& x : g.rd)
        x = rng.exponential();
    return g;
}

inline double snr(double gain, double dist, const Topology& topo) {
    return topo.power_to_noise() * gain / std::pow(dist, topo.alpha());
}

// Shannon capacity in bits/s/Hz.
inline double link_capacity(double gain, double dist, const Topology& topo) {
    return std::log2(1.0 + snr(gain, dist, topo));
}

// Outage is inclusive: a link exactly at the target rate fails.
inline bool is_outage(double capacity, double eta) { return capacity <= eta; }

} // namespace relaysel
