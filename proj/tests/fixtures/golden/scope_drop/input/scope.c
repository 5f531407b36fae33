#define LIMIT 64

int total(int *xs, int count) {
  int s = 0;
  for (int i = 0; i < count; i++)
    s += xs[i];
  return s;
}

void copy(int *dst, int *src, int n) {
  for (int i = 0; i < n; i++)
    dst[i] = src[i];
}

int window(int *buf) {
  int *w = buf + 1;
  int k = 4;
  return w[k - 1] + buf[LIMIT - 1];
}
