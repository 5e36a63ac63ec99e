#pragma once

#include <stdexcept>
#include <string>

namespace touchgen {

// Base of every exception thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ConfigError : public Error { using Error::Error; };
class ShapeError : public Error { using Error::Error; };
class IndexError : public Error { using Error::Error; };
class ParseError : public Error { using Error::Error; };
class IntegrityError : public Error { using Error::Error; };
class CaptionError : public Error { using Error::Error; };
class DataError : public Error { using Error::Error; };
class InputError : public Error { using Error::Error; };
class TrainingError : public Error { using Error::Error; };
class SamplingError : public Error { using Error::Error; };
class ScoreError : public Error { using Error::Error; };

}  // namespace touchgen
