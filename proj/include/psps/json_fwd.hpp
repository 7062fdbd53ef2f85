#pragma once

#include "json.hpp"

namespace psps {
using Json = nlohmann::json;
}
