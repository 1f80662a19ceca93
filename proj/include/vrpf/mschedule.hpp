#ifndef VRPF_MSCHEDULE_HPP
#define VRPF_MSCHEDULE_HPP

#include <cmath>
#include <cstddef>
#include <string>

#include "vrpf/errors.hpp"
#include "vrpf/linalg.hpp"

namespace vrpf {

enum class MMode { Constant, SharedPerTime, PerParticle };

inline std::string to_string(MMode m) {
    switch (m) {
        case MMode::Constant: return "constant";
        case MMode::SharedPerTime: return "shared-per-time";
        case MMode::PerParticle: return "per-particle";
    }
    return "constant";
}

/// The rejection-control hyperparameters M(i,t) >= 0, plus the quantile
/// target used to learn them. value(i, t) is the M applied to the accept/
/// reject step that generates particle i's latent at step t (0-based).
/// M = 0 accepts every proposal; larger M rejects more aggressively.
struct MSchedule {
    MMode mode = MMode::Constant;
    double constant = 0.0;
    Vec per_time;      // length T when mode == SharedPerTime
    Mat per_particle;  // N x T when mode == PerParticle

    double gamma = 0.5;        // target quantile for learning
    std::size_t j_draws = 64;  // proposals per quantile estimate
    std::size_t f_update = 10; // epochs between refreshes

    static MSchedule zero() { return constant_m(0.0); }

    static MSchedule constant_m(double m) {
        MSchedule s;
        s.mode = MMode::Constant;
        s.constant = m;
        s.validate();
        return s;
    }

    static MSchedule shared(Vec values) {
        MSchedule s;
        s.mode = MMode::SharedPerTime;
        s.per_time = std::move(values);
        s.validate();
        return s;
    }

    static MSchedule per_particle_values(Mat values) {
        MSchedule s;
        s.mode = MMode::PerParticle;
        s.per_particle = std::move(values);
        s.validate();
        return s;
    }

    double value(std::size_t particle, std::size_t t) const {
        switch (mode) {
            case MMode::Constant:
                return constant;
            case MMode::SharedPerTime:
                if (t >= per_time.size()) throw ConfigError("M schedule: time index out of range");
                return per_time[t];
            case MMode::PerParticle:
                if (particle >= per_particle.rows() || t >= per_particle.cols())
                    throw ConfigError("M schedule: index out of range");
                return per_particle(particle, t);
        }
        return 0.0;
    }

    bool all_zero() const {
        switch (mode) {
            case MMode::Constant:
                return constant == 0.0;
            case MMode::SharedPerTime: {
                for (double v : per_time)
                    if (v != 0.0) return false;
                return true;
            }
            case MMode::PerParticle: {
                for (double v : per_particle.data())
                    if (v != 0.0) return false;
                return true;
            }
        }
        return true;
    }

    void validate() const {
        auto check = [](double v) {
            if (!(v >= 0.0) || !std::isfinite(v))
                throw ConfigError("M schedule entries must be finite and >= 0");
        };
        switch (mode) {
            case MMode::Constant:
                check(constant);
                break;
            case MMode::SharedPerTime:
                for (double v : per_time) check(v);
                break;
            case MMode::PerParticle:
                for (double v : per_particle.data()) check(v);
                break;
        }
        if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("gamma must lie in [0,1]");
        if (j_draws < 1) throw ConfigError("quantile sample count J must be >= 1");
    }
};

}  // namespace vrpf

#endif  // VRPF_MSCHEDULE_HPP
