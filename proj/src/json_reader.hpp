// SPDX-License-Identifier: MIT
// Internal: strict JSON field reader shared by the config parsers.
#pragma once

#include <cstdint>
#include <limits>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "hte/experiment.hpp"

namespace hte::detail {

using nlohmann::json;

using Issues = std::vector<std::string>;

/// Field reader over one JSON object that records every problem under its
/// dotted path instead of stopping at the first.
class Reader {
public:
    Reader(const json* obj, std::string path, Issues& issues) : obj_(obj), path_(std::move(path)), issues_(&issues)
    {
        if (obj_ && !obj_->is_object()) {
            fail_here("must be an object");
            obj_ = nullptr;
        }
    }

    [[nodiscard]] std::string at(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
    [[nodiscard]] bool present() const noexcept { return obj_ != nullptr; }
    Issues& issues() noexcept { return *issues_; }

    [[nodiscard]] const json* find(const std::string& key)
    {
        seen_.insert(key);
        if (!obj_) return nullptr;
        auto it = obj_->find(key);
        return it == obj_->end() ? nullptr : &*it;
    }

    bool has(const std::string& key) { return find(key) != nullptr; }

    void fail(const std::string& key, const std::string& why) { issues_->push_back(at(key) + ": " + why); }
    void require(const std::string& key)
    {
        if (obj_ && !has(key)) fail(key, "is required");
    }

    void read(const std::string& key, int& out)
    {
        const json* v = find(key);
        if (!v) return;
        if (!v->is_number_integer()) return fail(key, "must be an integer");
        const auto x = v->get<std::int64_t>();
        if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max())
            return fail(key, "is out of range");
        out = static_cast<int>(x);
    }

    void read(const std::string& key, std::uint64_t& out)
    {
        const json* v = find(key);
        if (!v) return;
        if (v->is_number_unsigned()) {
            out = v->get<std::uint64_t>();
        } else if (v->is_number_integer()) {
            fail(key, "must be a non-negative integer");
        } else {
            fail(key, "must be an integer");
        }
    }

    void read(const std::string& key, double& out)
    {
        const json* v = find(key);
        if (!v) return;
        if (v->is_null()) {
            out = std::numeric_limits<double>::quiet_NaN();
            return;
        }
        if (!v->is_number()) return fail(key, "must be a number");
        out = v->get<double>();
    }

    void read(const std::string& key, bool& out)
    {
        const json* v = find(key);
        if (!v) return;
        if (!v->is_boolean()) return fail(key, "must be true or false");
        out = v->get<bool>();
    }

    void read(const std::string& key, std::string& out)
    {
        const json* v = find(key);
        if (!v) return;
        if (!v->is_string()) return fail(key, "must be a string");
        out = v->get<std::string>();
    }

    template <class E, class Parse>
    void read_enum(const std::string& key, E& out, Parse parse)
    {
        std::string name;
        const std::size_t before = issues_->size();
        read(key, name);
        if (issues_->size() != before || !has(key)) return;
        try {
            out = parse(name);
        } catch (const std::exception& e) {
            fail(key, e.what());
        }
    }

    void read(const std::string& key, std::vector<double>& out)
    {
        const json* v = find(key);
        if (!v) return;
        if (!v->is_array()) return fail(key, "must be an array of numbers");
        out.clear();
        for (const auto& x : *v) {
            if (x.is_null()) {
                out.push_back(std::numeric_limits<double>::quiet_NaN());
            } else if (x.is_number()) {
                out.push_back(x.get<double>());
            } else {
                return fail(key, "must be an array of numbers");
            }
        }
    }

    void read(const std::string& key, std::vector<int>& out)
    {
        const json* v = find(key);
        if (!v) return;
        if (!v->is_array()) return fail(key, "must be an array of integers");
        out.clear();
        for (const auto& x : *v) {
            if (!x.is_number_integer()) return fail(key, "must be an array of integers");
            out.push_back(x.get<int>());
        }
    }

    void read(const std::string& key, std::vector<std::string>& out)
    {
        const json* v = find(key);
        if (!v) return;
        if (!v->is_array()) return fail(key, "must be an array of strings");
        out.clear();
        for (const auto& x : *v) {
            if (!x.is_string()) return fail(key, "must be an array of strings");
            out.push_back(x.get<std::string>());
        }
    }

    /// Reports keys that no reader asked for.
    void finish()
    {
        if (!obj_) return;
        for (auto it = obj_->begin(); it != obj_->end(); ++it) {
            if (!seen_.contains(it.key())) issues_->push_back(at(it.key()) + ": unknown field");
        }
    }

private:
    void fail_here(const std::string& why) { issues_->push_back((path_.empty() ? "(root)" : path_) + ": " + why); }

    const json* obj_;
    std::string path_;
    Issues* issues_;
    std::set<std::string> seen_;
};

/// Reads an instance descriptor section (operator, solution, d, domain,
/// coefficient_seed, diffusion).
InstanceDescriptor read_instance(Reader r);

std::optional<Eigen::MatrixXd> matrix_from_json(const json& j, const std::string& path, Issues& issues);

/// Fails when schema_version is missing or unsupported.
void check_version(Reader& r);

}  // namespace hte::detail
