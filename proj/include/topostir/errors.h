#pragma once

#include <stdexcept>
#include <string>

namespace topostir {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ParseError : public Error { public: using Error::Error; };
class OverflowError : public Error { public: using Error::Error; };
class NotPseudoAnosov : public Error { public: using Error::Error; };
class ConfigError : public Error { public: using Error::Error; };
class DegenerateProjection : public Error { public: using Error::Error; };
class IllConditioned : public Error { public: using Error::Error; };
class ResidualTooLarge : public Error { public: using Error::Error; };
class OutOfDomain : public Error { public: using Error::Error; };
class LeftDomain : public Error { public: using Error::Error; };
class DegenerateSeries : public Error { public: using Error::Error; };

}  // namespace topostir
