// Reward command for tune: reads one decision per line, prints -(a - 2)^2.
#include <iostream>
#include <string>

int main() {
  double a = 0.0;
  if (!(std::cin >> a)) return 1;
  std::cout.precision(17);
  std::cout << -(a - 2.0) * (a - 2.0) << "\n";
  return 0;
}
