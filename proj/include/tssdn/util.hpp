#pragma once

#include <string>
#include <vector>

namespace tssdn::util {

std::vector<std::string> split(const std::string& s, char sep);
std::string trim(const std::string& s);
std::string join(const std::vector<std::string>& parts, const std::string& sep);

}  // namespace tssdn::util
