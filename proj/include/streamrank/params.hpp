#pragma once

#include "streamrank/autodiff.hpp"
#include "streamrank/rng.hpp"
#include "streamrank/types.hpp"

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace streamrank::nn {

enum class Init { XAVIER, ZERO };

// Named dense parameters in insertion order. Name order is the canonical
// iteration order for optimizer updates and checkpoint layout, so runs are
// reproducible regardless of map internals.
template <typename Scalar>
class ParamStoreT {
public:
    std::vector<std::string> names;
    std::vector<MatrixX<Scalar>> values;

    bool has(const std::string& name) const { return index_.count(name) != 0; }

    MatrixX<Scalar>& at(const std::string& name) {
        auto it = index_.find(name);
        if (it == index_.end()) throw std::runtime_error("unknown parameter: " + name);
        return values[it->second];
    }

    const MatrixX<Scalar>& at(const std::string& name) const {
        auto it = index_.find(name);
        if (it == index_.end()) throw std::runtime_error("unknown parameter: " + name);
        return values[it->second];
    }

    MatrixX<Scalar>& create(const std::string& name, MatrixX<Scalar> value) {
        if (has(name)) throw std::runtime_error("duplicate parameter: " + name);
        index_[name] = names.size();
        names.push_back(name);
        values.push_back(std::move(value));
        return values.back();
    }

    std::size_t count() const { return names.size(); }

    std::size_t total_coeffs() const {
        std::size_t n = 0;
        for (const auto& v : values) n += static_cast<std::size_t>(v.size());
        return n;
    }

private:
    std::unordered_map<std::string, std::size_t> index_;
};

using ParamStore = ParamStoreT<double>;

// Parameters materialize lazily on first use. Each is initialized from an rng
// derived from (init_seed, name), so initialization is independent of the
// order in which forward passes touch parameters.
template <typename Scalar>
MatrixX<Scalar> init_matrix(Eigen::Index rows, Eigen::Index cols, Init init, std::uint64_t init_seed,
                            const std::string& name) {
    MatrixX<Scalar> m(rows, cols);
    if (init == Init::ZERO) {
        m.setZero();
        return m;
    }
    Rng rng = derive_rng(init_seed, "init:" + name);
    const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < cols; ++j) {
            m(i, j) = static_cast<Scalar>(limit * (2.0 * rng.uniform() - 1.0));
        }
    }
    return m;
}

// Binds store parameters to tape leaves for one forward/backward pass and
// collects their gradients afterwards.
template <typename Scalar>
class GraphContext {
public:
    GraphContext(ad::Tape<Scalar>& tape, ParamStoreT<Scalar>& store, std::uint64_t init_seed)
        : tape_(tape), store_(store), init_seed_(init_seed) {}

    ad::Var<Scalar> param(const std::string& name, Eigen::Index rows, Eigen::Index cols, Init init) {
        auto it = bound_.find(name);
        if (it != bound_.end()) return {&tape_, it->second};
        if (!store_.has(name)) {
            store_.create(name, init_matrix<Scalar>(rows, cols, init, init_seed_, name));
        }
        const auto& value = store_.at(name);
        if (value.rows() != rows || value.cols() != cols) {
            throw std::runtime_error("parameter shape mismatch for " + name);
        }
        ad::Var<Scalar> v = ad::leaf(tape_, value);
        bound_[name] = v.idx;
        return v;
    }

    ad::Tape<Scalar>& tape() { return tape_; }
    ParamStoreT<Scalar>& store() { return store_; }

    // Adds each bound parameter's tape gradient into grads (keyed by name).
    void accumulate_grads(std::unordered_map<std::string, MatrixX<Scalar>>& grads) const {
        for (const auto& [name, idx] : bound_) {
            const auto& g = tape_.nodes[idx].grad;
            auto it = grads.find(name);
            if (it == grads.end()) {
                grads.emplace(name, g);
            } else {
                it->second += g;
            }
        }
    }

private:
    ad::Tape<Scalar>& tape_;
    ParamStoreT<Scalar>& store_;
    std::uint64_t init_seed_;
    std::unordered_map<std::string, int> bound_;
};

// Checkpoint: params.bin holds float64 coefficient data, row-major, in name
// order; a JSON descriptor records names, shapes, offsets, and the config
// hash. Loading matches entries by name so stores may gain parameters later.
void save_checkpoint(const ParamStore& store, const std::string& path_base, std::uint64_t config_hash);
std::uint64_t load_checkpoint(const std::string& path_base, ParamStore& store);

}  // namespace streamrank::nn
