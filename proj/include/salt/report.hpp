#pragma once

#include "json.hpp"
#include "salt/overlap.hpp"
#include "salt/transfer.hpp"

namespace salt {

nlohmann::json to_json(const CoverageReport& r);
nlohmann::json to_json(const TransferReport& r);

}  // namespace salt
