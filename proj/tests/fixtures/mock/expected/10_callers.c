#include <stdlib.h>

static void zero(arr<unsigned char> buf : count(len), unsigned len) {
  for (unsigned i = 0; i < len; i++)
    buf[i] = 0;
}

unsigned char *fresh(unsigned len) {
  arr<unsigned char> out : count(len) = malloc(len * sizeof(unsigned char));
  zero(out, len);
  out[len - 1] = 1;
  return out;
}
