// Deterministic stand-in for a quality scorer.
//
//   stub_scorer <pair_list> [--mode negsize|constant|short|garbage|fail]
//
// Reads "<image>\t<depth>" lines and prints one score per line:
//   negsize   minus the image file size in bytes (default)
//   constant  0.5 for every pair
//   short     like negsize but drops the last line
//   garbage   like negsize but the second line is not a number
//   fail      prints nothing and exits with status 7

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: stub_scorer <pair_list> [--mode M]\n";
    return 64;
  }
  std::string mode = "negsize";
  if (argc >= 4 && std::string(argv[2]) == "--mode") mode = argv[3];
  if (mode == "fail") {
    std::cerr << "stub_scorer: simulated failure\n";
    return 7;
  }
  std::ifstream list(argv[1]);
  std::vector<std::string> out;
  std::string line;
  while (std::getline(list, line)) {
    const auto tab = line.find('\t');
    if (tab == std::string::npos) continue;
    if (mode == "constant") {
      out.push_back("0.5");
    } else {
      out.push_back(std::to_string(-static_cast<long long>(std::filesystem::file_size(line.substr(0, tab)))));
    }
  }
  if (mode == "short" && !out.empty()) out.pop_back();
  if (mode == "garbage" && out.size() > 1) out[1] = "not-a-score";
  for (const auto& s : out) std::cout << s << '\n';
  return 0;
}
