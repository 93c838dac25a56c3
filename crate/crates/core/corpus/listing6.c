int arr[1000];
int a = 6;
#pragma omp parallel for
#pragma drs
for(int i = 0; i < 10; i++){
    if(i < 5){
        arr[i%a+a*i] = arr[2*i];
    }
}
