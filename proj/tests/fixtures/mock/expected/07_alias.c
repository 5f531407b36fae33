#include <stdlib.h>

long fill(int n) {
  arr<long> base : count(n) = malloc(n * sizeof(long));
  arr<long> cur : count(n);
  base[0] = 0;
  cur = base;
  cur[0] = 1;
  return cur[n - 1];
}
