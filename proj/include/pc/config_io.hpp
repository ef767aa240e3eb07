#pragma once

#include <string>

#include "pc/training.hpp"

namespace pc {

// key = value lines, '#' comments. Serialization uses a fixed key order and
// round-trips doubles exactly, so serialize(parse(serialize(c))) is
// byte-identical.
std::string serialize_config(const TrainConfig& cfg);
TrainConfig parse_config(const std::string& text);
TrainConfig load_config_file(const std::string& path);

}  // namespace pc
