#pragma once

#include <set>
#include <string>

#include <nlohmann/json.hpp>

#include "nlfb/errors.hpp"

namespace nlfb::detail {

inline void reject_unknown(const nlohmann::json& j, const std::set<std::string>& known, const std::string& where)
{
    std::string bad;
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!known.count(it.key()))
            bad += (bad.empty() ? "" : ", ") + it.key();
    if (!bad.empty())
        throw ValidationError(where + ": unknown keys: " + bad);
}

} // namespace nlfb::detail
