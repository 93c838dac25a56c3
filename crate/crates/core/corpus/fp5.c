// Stand-in: the original case is not reprinted. The else branch is the
// only one that could race and it is unreachable.
int size = 100;
int arr[size];

#pragma omp parallel for
#pragma drs
for(int i = 0; i < 50; i++){
    if(i >= 0){
        arr[2*i] = i;
    }else{
        arr[i+1] = arr[i];
    }
}
