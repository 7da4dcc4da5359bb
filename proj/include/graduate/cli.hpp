#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace graduate {

// Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
int cli_main(int argc, char** argv);
int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace graduate
