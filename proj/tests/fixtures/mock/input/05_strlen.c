int my_strlen(char *s) {
  int k = 0;
  while (s[k] != '\0')
    k++;
  return k;
}
