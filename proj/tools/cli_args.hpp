#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace gfe::cli {

enum class Command { train, eval, reconstruct, latents, fixture_check };

struct RunSpec {
  Command command = Command::train;
  std::string config_path;  // empty: defaults only
  std::string data_dir;
  std::string out_dir;
  std::string checkpoint;
  std::string encoding = "default";  // default | amd | encoder
  std::size_t limit = 0;             // samples for eval/reconstruct/latents; 0 = command default
  std::uint64_t check_seed = 1;
  // Config assignments from flags, applied after the config file.
  std::vector<std::pair<std::string, std::string>> overrides;
};

// Bad command line. `status` is the process exit status to use; --help
// raises it with status 0 and the help text as the message.
class UsageError : public std::runtime_error {
 public:
  UsageError(const std::string& what, int status = 2) : std::runtime_error(what), status_(status) {}
  int status() const { return status_; }

 private:
  int status_;
};

// env_data_dir is the GFE_DATA_DIR fallback (may be null).
RunSpec parse_args(int argc, const char* const* argv, const char* env_data_dir);

// Checks that every input path exists and the output directory is usable.
void validate_paths(const RunSpec& spec);

std::string command_name(Command c);

}  // namespace gfe::cli
