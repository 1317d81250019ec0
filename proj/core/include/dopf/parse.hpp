#pragma once

#include <optional>
#include <stdexcept>
#include <string>

#include "dopf/network.hpp"

namespace dopf {

enum class CaseFormat { Matpower, Json };

struct ParseError : std::runtime_error {
  int line;
  int col;
  ParseError(int line_, int col_, const std::string& msg)
      : std::runtime_error("parse error at " + std::to_string(line_) + ":" +
                           std::to_string(col_) + ": " + msg),
        line(line_),
        col(col_) {}
};

// Matpower subset: mpc.bus/gen/branch/gencost matrices, polynomial costs of
// degree <= 2, in-service rows only, no tap ratios or phase shifts.
// Structural problems (syntax, unsupported features, disconnected graph)
// throw ParseError; value-level checks are validate()'s job.
Network parse_case(const std::string& text, CaseFormat format);

// Reads the file; format from the extension (.m / .json) unless given.
Network parse_case_file(const std::string& path,
                        std::optional<CaseFormat> format = {});

// Canonical JSON form; parse_case(serialize_network(net), Json) round-trips
// every value exactly.
std::string serialize_network(const Network& net);

}  // namespace dopf
