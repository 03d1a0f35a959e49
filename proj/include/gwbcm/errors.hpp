#pragma once

#include <stdexcept>
#include <string>

namespace gwbcm {

// Error categories map onto CLI exit codes: usage -> 2, data -> 3, numerical -> 4.
enum class ErrorCategory { usage, data, numerical };

class Error : public std::runtime_error {
public:
  Error(std::string msg, ErrorCategory cat)
      : std::runtime_error(std::move(msg)), category_(cat) {}
  ErrorCategory category() const { return category_; }

private:
  ErrorCategory category_;
};

#define GWBCM_DEFINE_ERROR(Name, Cat)                                        \
  class Name : public Error {                                                \
  public:                                                                    \
    explicit Name(const std::string& msg)                                    \
        : Error(std::string(#Name) + ": " + msg, ErrorCategory::Cat) {}      \
  }

GWBCM_DEFINE_ERROR(DimensionMismatch, data);
GWBCM_DEFINE_ERROR(NonSquare, data);
GWBCM_DEFINE_ERROR(NonPositiveMass, data);
GWBCM_DEFINE_ERROR(MassSumMismatch, data);
GWBCM_DEFINE_ERROR(NonFiniteEntry, data);
GWBCM_DEFINE_ERROR(MarginalMismatch, data);
GWBCM_DEFINE_ERROR(Infeasible, data);
GWBCM_DEFINE_ERROR(NumericalUnderflow, numerical);
GWBCM_DEFINE_ERROR(NotConverged, numerical);
GWBCM_DEFINE_ERROR(TooLarge, usage);
GWBCM_DEFINE_ERROR(EmptySupport, numerical);
GWBCM_DEFINE_ERROR(BlowupTooLarge, numerical);
GWBCM_DEFINE_ERROR(EmptyVector, usage);
GWBCM_DEFINE_ERROR(EmptyInput, usage);
GWBCM_DEFINE_ERROR(ParseError, data);
GWBCM_DEFINE_ERROR(SchemaError, data);
GWBCM_DEFINE_ERROR(EmptyFile, data);
GWBCM_DEFINE_ERROR(BadMassColumn, data);
GWBCM_DEFINE_ERROR(AllPointsRemoved, data);

#undef GWBCM_DEFINE_ERROR

}  // namespace gwbcm
