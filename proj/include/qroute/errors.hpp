#pragma once

#include <stdexcept>
#include <string>

namespace qroute {

// All library failures derive from Error so callers can catch one type.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidRouteError : public Error { using Error::Error; };
class ConfigError : public Error { using Error::Error; };
class ShapeError : public Error { using Error::Error; };
class DomainError : public Error { using Error::Error; };
class ParseError : public Error { using Error::Error; };
class IllegalActionError : public Error { using Error::Error; };
class TerminalStateError : public Error { using Error::Error; };
class NoFeasibleActionError : public Error { using Error::Error; };
class NumericalError : public Error { using Error::Error; };
class InternalError : public Error { using Error::Error; };
class RefusalError : public Error { using Error::Error; };

}  // namespace qroute
