#pragma once

#include <cmath>
#include <deque>
#include <string>
#include <unordered_map>
#include <vector>

#include "ztwin/errors.hpp"

namespace ztwin::predictor {

// Key-value store of corrected predictions, keyed by the whole input window.
// Keys quantize each normalized element to 1e-4 so float noise far below any
// distinct bandwidth level cannot split entries.  Eviction is FIFO by first
// insertion; overwriting a key does not refresh its age.
class MemoryModule {
public:
    explicit MemoryModule(std::size_t capacity = 4096) : capacity_(capacity) {
        if (capacity_ < 1) throw ParameterError("memory.capacity must be >= 1");
    }

    static std::string key_of(const std::vector<double>& window) {
        std::string key;
        key.reserve(window.size() * 8);
        for (std::size_t i = 0; i < window.size(); ++i) {
            if (i > 0) key.push_back(',');
            key += std::to_string(std::llround(window[i] * 1e4));
        }
        return key;
    }

    bool contains(const std::string& key) const { return map_.count(key) > 0; }

    // Returns true and writes the stored value on a hit.
    bool lookup(const std::vector<double>& window, double& out) const {
        auto it = map_.find(key_of(window));
        if (it == map_.end()) return false;
        out = it->second;
        return true;
    }

    void put(const std::vector<double>& window, double value) { put_key(key_of(window), value); }

    void put_key(const std::string& key, double value) {
        auto it = map_.find(key);
        if (it != map_.end()) {
            it->second = value;
            return;
        }
        if (map_.size() == capacity_) {
            map_.erase(order_.front());
            order_.pop_front();
        }
        map_.emplace(key, value);
        order_.push_back(key);
    }

    std::size_t size() const { return map_.size(); }
    std::size_t capacity() const { return capacity_; }

    // Entries in insertion order, for persistence.
    std::vector<std::pair<std::string, double>> entries() const {
        std::vector<std::pair<std::string, double>> out;
        out.reserve(order_.size());
        for (const auto& key : order_) out.emplace_back(key, map_.at(key));
        return out;
    }

private:
    std::size_t capacity_;
    std::unordered_map<std::string, double> map_;
    std::deque<std::string> order_;
};

} // namespace ztwin::predictor
