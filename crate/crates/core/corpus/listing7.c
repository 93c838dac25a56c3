int main(int n, int m) {
  int i, j;
  int b[100][100];
  for (i=1;i<n;i++)
    #pragma omp parallel for
    #pragma drs
    for (j=1;j<m;j++)
      b[i][j]=b[i-1][j-1];
  return 0;
}
