int size = 100;
int arr[size];

#pragma omp parallel for
#pragma drs
for(int i = 0; i < 99; i++){
    if(i == 100){
        arr[i] = arr[i+1] + i;
    }
}
