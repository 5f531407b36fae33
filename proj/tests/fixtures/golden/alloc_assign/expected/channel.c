#include <stdlib.h>

typedef unsigned long ulong;

ulong channelNets;
ulong channelTracks;
typedef struct arr_of_long {
  arr<long> ptr : count(len);
  int len;
} arr_of_long;

arr<struct arr_of_long> costMatrix;

void AllocAssign(void) {
  ulong net; ulong n = channelNets+1;
  costMatrix = 
    (arr<struct arr_of_long>)
    malloc(n * sizeof(struct arr_of_long));
  for (net = 1; net <= channelNets; net++) {
  costMatrix[net].ptr = 
    malloc((channelTracks+2) * sizeof(long));
  costMatrix[net].len = channelTracks+2;
  }
}
