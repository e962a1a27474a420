#pragma once

#include <stdexcept>
#include <string>

namespace cwescan {

// Base for every error the toolkit raises. `code()` is a stable machine-readable
// tag used by the review API and CLI artifacts.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

#define CWESCAN_DEFINE_ERROR(Name, tag)                                      \
  class Name : public Error {                                                \
   public:                                                                   \
    explicit Name(const std::string& message) : Error(tag, message) {}      \
  };

CWESCAN_DEFINE_ERROR(ParseError, "parse_error")
CWESCAN_DEFINE_ERROR(LoadError, "load_error")
CWESCAN_DEFINE_ERROR(ArgumentError, "argument_error")
CWESCAN_DEFINE_ERROR(IoError, "io_error")
CWESCAN_DEFINE_ERROR(ValidationError, "validation_error")
CWESCAN_DEFINE_ERROR(ContractError, "contract_violation")
CWESCAN_DEFINE_ERROR(NotFoundError, "not_found")
CWESCAN_DEFINE_ERROR(ConflictError, "conflict")
CWESCAN_DEFINE_ERROR(TemplateError, "template_error")
CWESCAN_DEFINE_ERROR(GenerationError, "generation_error")
CWESCAN_DEFINE_ERROR(ProtocolError, "protocol_error")
CWESCAN_DEFINE_ERROR(ConfigError, "config_error")
CWESCAN_DEFINE_ERROR(BenchError, "bench_error")
CWESCAN_DEFINE_ERROR(EvalError, "eval_error")
CWESCAN_DEFINE_ERROR(StoreCorruptError, "store_corrupt")

#undef CWESCAN_DEFINE_ERROR

// Connect/timeout failures carry how long the attempt took.
class TransportError : public Error {
 public:
  TransportError(const std::string& message, double elapsed_seconds)
      : Error("transport_error", message), elapsed_seconds_(elapsed_seconds) {}

  double elapsed_seconds() const noexcept { return elapsed_seconds_; }

 private:
  double elapsed_seconds_;
};

}  // namespace cwescan
