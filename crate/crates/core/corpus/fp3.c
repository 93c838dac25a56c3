int size = 100;
int arr[size];

#pragma omp parallel for
#pragma drs
for(int i = 0; i < 10; i++){
    arr[i] = arr[i%10] + 1;
}
