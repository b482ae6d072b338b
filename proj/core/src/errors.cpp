#include "gscd/errors.hpp"

namespace gscd {

ParseError::ParseError(const std::string& what, int line)
    : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

}  // namespace gscd
