#pragma once

#include <stdexcept>
#include <string>

namespace creditrisk {

/// Process exit codes used by the command-line frontend.
enum class ExitCode : int { ok = 0, usage = 1, data = 2, model = 3 };

/// Base of every error the library throws. `code()` is a short stable token
/// ("ingest", "join", ...) suitable for machine parsing; `exit_code()` maps
/// the error onto the CLI exit-code table.
class Error : public std::runtime_error {
public:
    Error(std::string code, ExitCode exit, const std::string& message)
        : std::runtime_error(message), code_(std::move(code)), exit_(exit) {}

    const std::string& code() const noexcept { return code_; }
    ExitCode exit_code() const noexcept { return exit_; }

private:
    std::string code_;
    ExitCode exit_;
};

#define CREDITRISK_DEFINE_ERROR(Name, token, exit)                  \
    class Name : public Error {                                     \
    public:                                                         \
        explicit Name(const std::string& message)                   \
            : Error(token, ExitCode::exit, message) {}              \
    }

CREDITRISK_DEFINE_ERROR(IngestError, "ingest", data);
CREDITRISK_DEFINE_ERROR(JoinError, "join", data);
CREDITRISK_DEFINE_ERROR(EncodeError, "encode", data);
CREDITRISK_DEFINE_ERROR(SplitError, "split", data);
CREDITRISK_DEFINE_ERROR(FitError, "fit", data);
CREDITRISK_DEFINE_ERROR(EvalError, "eval", data);
CREDITRISK_DEFINE_ERROR(ParamError, "param", usage);
CREDITRISK_DEFINE_ERROR(GridError, "grid", usage);
CREDITRISK_DEFINE_ERROR(ConfigError, "config", usage);
CREDITRISK_DEFINE_ERROR(IoError, "io", data);
CREDITRISK_DEFINE_ERROR(ModelError, "model", model);

#undef CREDITRISK_DEFINE_ERROR

}  // namespace creditrisk
